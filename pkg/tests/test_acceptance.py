"""Acceptance suite: one test per shipped behavioural claim.

Every test pins its complete configuration (gate sets, database depths,
training seeds, reducer settings) so a rerun measures the same thing.
Artifacts shared across criteria are session-scoped; the two timing
criteria measure on the machine running the suite and report the numbers
they saw in their failure messages.
"""

import itertools
from time import perf_counter

import numpy as np
import pytest

from qcreduce.bench import BenchSpec, run_bench
from qcreduce.circuit import (
    Circuit,
    Token,
    circuit_unitary,
    compact_to_subspace,
    instantiations,
    random_circuit,
    select_subblock,
    serialize_circuit,
    tokens_unitary,
)
from qcreduce.forest import (
    ForestParams,
    generate_training_data,
    info_gain,
    save_forest,
    shannon_entropy,
    train_forest,
)
from qcreduce.gates import parse_gate_set
from qcreduce.graph import build_graph, extract_database, graph_stats, lookup, save_database
from qcreduce.reducer import ReducerConfig, Strategy, reduce, verify_equivalence
from qcreduce.unitary import equal_up_to_phase, identity


@pytest.fixture(scope="session")
def cliff_gs():
    return parse_gate_set("preset:clifford_t")


@pytest.fixture(scope="session")
def ion_gs():
    return parse_gate_set("preset:iontrap")


@pytest.fixture(scope="session")
def cliff_db4(cliff_gs):
    return extract_database(build_graph(cliff_gs, 2, 4))


@pytest.fixture(scope="session")
def ion_db3(ion_gs):
    return extract_database(build_graph(ion_gs, 2, 3))


@pytest.fixture(scope="session")
def cliff_forest(cliff_gs, cliff_db4):
    samples = generate_training_data(cliff_gs, cliff_db4,
                                     np.random.default_rng(9), 4000)
    return train_forest(samples, ForestParams(), np.random.default_rng(5))


@pytest.fixture(scope="session")
def ion_forest(ion_gs, ion_db3):
    samples = generate_training_data(ion_gs, ion_db3,
                                     np.random.default_rng(11), 2000)
    return train_forest(samples, ForestParams(), np.random.default_rng(5))


@pytest.fixture(scope="session")
def gate_forest(cliff_gs, cliff_db4):
    # small sample count plus fully grown trees on purpose: large samples
    # flood leaves with duplicate feature vectors and flatten the vote
    # toward a step at 0.5, which costs recall at tau 0.3
    samples = generate_training_data(cliff_gs, cliff_db4,
                                     np.random.default_rng(23), 2500)
    params = ForestParams(n_trees=250, max_depth=28, features_per_split=4)
    return train_forest(samples, params, np.random.default_rng(5))


@pytest.fixture(scope="session")
def bench_artifacts(tmp_path_factory, cliff_db4, cliff_forest):
    root = tmp_path_factory.mktemp("acceptance")
    db_path = root / "cliff_2q_d4.qcrdb"
    model_path = root / "cliff_default.qcrrf"
    save_database(cliff_db4, db_path)
    save_forest(cliff_forest, model_path)
    return str(db_path), str(model_path)


def test_criterion_1_every_strategy_preserves_equivalence(
        cliff_gs, ion_gs, cliff_db4, ion_db3, cliff_forest, ion_forest):
    kits = {
        "clifford_t": (cliff_gs, cliff_db4, cliff_forest),
        "iontrap": (ion_gs, ion_db3, ion_forest),
    }
    failures = []
    for i in range(100):
        name = "clifford_t" if i % 2 == 0 else "iontrap"
        gs, db, model = kits[name]
        n_qubits = 2 if (i // 2) % 2 == 0 else 3
        length = 40 + (i * 61) // 100
        circ = random_circuit(gs, n_qubits, length, np.random.default_rng(1000 + i))
        cfg = ReducerConfig(stall_limit=100, rs_samples_per_block=200,
                            target_length=length // 2, seed=i)
        for strategy in (Strategy("rs"), Strategy("dr", db=db),
                         Strategy("rf", db=db, forest=model)):
            out, _ = reduce(circ, gs, strategy, cfg)
            if not verify_equivalence(circ, out, gs, tol=1e-5):
                failures.append((i, name, n_qubits, length, strategy.kind))
    assert not failures, (
        f"equivalence violated in {len(failures)} of 300 runs; "
        f"first cases (index, preset, qubits, length, strategy): {failures[:5]}")


def test_criterion_2_database_lengths_match_brute_force():
    gs = parse_gate_set("h h arity 1\ns s arity 1")
    pool = instantiations(gs, 1)
    reps = [identity(1)]
    min_len = [0]
    for length in range(1, 7):
        for word in itertools.product(pool, repeat=length):
            u = tokens_unitary(list(word), gs, 1)
            if not any(equal_up_to_phase(u, r) for r in reps):
                reps.append(u)
                min_len.append(length)
    db = extract_database(build_graph(gs, 1, 6))
    assert len(db) == len(reps), (
        f"database holds {len(db)} unitaries, brute force found {len(reps)}")
    for k, (rep, want) in enumerate(zip(reps, min_len)):
        fact = lookup(db, rep)
        assert fact is not None, f"brute-force class {k} missing from database"
        assert len(fact) == want, (
            f"class {k}: database factorization length {len(fact)}, "
            f"brute force shortest {want}")


def _inverse_pair_pool():
    pairs = []
    for q in (0, 1):
        pairs += [
            (Token("s", (q,)), Token("sdg", (q,))),
            (Token("t", (q,)), Token("tdg", (q,))),
            (Token("h", (q,)), Token("h", (q,))),
            (Token("x", (q,)), Token("x", (q,))),
        ]
    pairs += [(Token("cx", (0, 1)), Token("cx", (0, 1))),
              (Token("cx", (1, 0)), Token("cx", (1, 0)))]
    return pairs


def _padded_circuit(gs, seed):
    rng = np.random.default_rng(seed)
    tokens = list(random_circuit(gs, 2, 10, rng).tokens)
    pairs = _inverse_pair_pool()
    for _ in range(15):
        a, b = pairs[int(rng.integers(len(pairs)))]
        pos = int(rng.integers(len(tokens) + 1))
        tokens[pos:pos] = [a, b]
    return Circuit(2, tokens)


def test_criterion_3_inverse_pair_padding_recovered(cliff_gs, cliff_db4):
    hits = 0
    worst = 0
    for seed in range(50):
        circ = _padded_circuit(cliff_gs, seed)
        assert len(circ.tokens) == 40
        out, _ = reduce(circ, cliff_gs, Strategy("dr", db=cliff_db4),
                        ReducerConfig(stall_limit=250, target_length=10,
                                      seed=seed))
        worst = max(worst, len(out.tokens))
        if len(out.tokens) <= 14:
            hits += 1
    assert hits >= 45, (
        f"only {hits}/50 padded circuits reduced to length <= 14 "
        f"(worst output length {worst})")


def test_criterion_4_strategy_wall_time_ordering(bench_artifacts):
    db_path, model_path = bench_artifacts
    spec = BenchSpec(
        gate_set_text="preset:clifford_t",
        n_qubits=2,
        length=60,
        runs=30,
        strategies=("rs", "dr", "rf"),
        seed=1234,
        db_path=db_path,
        model_path=model_path,
        reducer=ReducerConfig(),
    )
    report = run_bench(spec, jobs=1)
    rs = report.aggregates["rs"].mean
    dr = report.aggregates["dr"].mean
    rf = report.aggregates["rf"].mean
    detail = f"mean wall times: rs={rs:.4f}s dr={dr:.4f}s rf={rf:.4f}s"
    problems = []
    if not rf <= dr:
        problems.append(f"rf mean exceeds dr mean ({rf:.4f}s > {dr:.4f}s)")
    if not dr <= rs:
        problems.append(f"dr mean exceeds rs mean ({dr:.4f}s > {rs:.4f}s)")
    if not rs >= 2 * dr:
        problems.append(f"rs mean is under 2x dr mean ({rs:.4f}s < 2*{dr:.4f}s)")
    assert not problems, f"{'; '.join(problems)} [{detail}]"


def test_criterion_5_graph_growth_bounded_and_monotone():
    for name in ("iontrap", "nisq", "clifford_t"):
        gs = parse_gate_set(f"preset:{name}")
        inst = len(instantiations(gs, 2))
        prev = 0
        for depth in range(2, 6):
            nodes = graph_stats(build_graph(gs, 2, depth)).nodes
            assert nodes < inst**depth, (
                f"{name}: {nodes} nodes at depth {depth} is not below "
                f"{inst}^{depth} = {inst**depth}")
            assert nodes >= prev, (
                f"{name}: node count dropped from {prev} to {nodes} "
                f"at depth {depth}")
            prev = nodes


def test_criterion_6_entropy_and_gain_goldens():
    assert shannon_entropy([0.5, 0.5]) == 1.0
    assert shannon_entropy([0.25, 0.75]) == pytest.approx(0.81127812, abs=1e-8)
    parent = [0, 0, 1, 1]
    gain = info_gain(parent, ([0, 0], [1, 1]))
    assert gain == pytest.approx(1.0, abs=1e-12)


def _probe_unitaries(gs, db, rng, count, len_range=(3, 7)):
    # same block draw the training generator uses, without the class
    # balancing, so the latency mix matches reducer traffic
    carrier_len = max(10, 2 * len_range[1])
    out = []
    while len(out) < count:
        c = random_circuit(gs, db.qubit_count, carrier_len, rng)
        block = select_subblock(c, rng, *len_range)
        compact, mapping = compact_to_subspace(block.tokens)
        u = tokens_unitary(compact, gs, len(mapping))
        if len(mapping) < db.qubit_count:
            u = np.kron(u, identity(db.qubit_count - len(mapping)))
        out.append(u)
    return out


def test_criterion_7_forest_gate_recall_and_latency(cliff_gs, cliff_db4,
                                                    gate_forest):
    samples = generate_training_data(cliff_gs, cliff_db4,
                                     np.random.default_rng(101), 10000)
    reducible = [s.features for s in samples if s.label == 1]
    opened = sum(1 for f in reducible
                 if gate_forest.predict_proba(f) >= gate_forest.tau)
    recall = opened / len(reducible)

    # the recall pass above warms the prediction path before timing
    feats = [s.features for s in samples]
    t0 = perf_counter()
    for f in feats:
        gate_forest.predict_proba(f)
    predict_s = (perf_counter() - t0) / len(feats)

    probes = _probe_unitaries(cliff_gs, cliff_db4,
                              np.random.default_rng(404), 10000)
    t0 = perf_counter()
    for u in probes:
        lookup(cliff_db4, u)
    lookup_s = (perf_counter() - t0) / len(probes)

    ratio = lookup_s / predict_s
    problems = []
    if not recall >= 0.9:
        problems.append(
            f"recall {recall:.4f} < 0.9 at tau {gate_forest.tau} "
            f"({opened}/{len(reducible)} reducible blocks passed)")
    if not ratio >= 10.0:
        problems.append(
            f"prediction is only {ratio:.2f}x faster than lookup, not 10x "
            f"(predict {predict_s * 1e6:.1f}us, lookup {lookup_s * 1e6:.1f}us)")
    assert not problems, "; ".join(problems)


NAIVE_BELL = [
    Token("rz_p2", (0,)), Token("rx_p2", (0,)), Token("rz_p2", (0,)),
    Token("ry_p2", (0,)),
    Token("rxx_p2", (0, 1)),
    Token("rx_m2", (0,)), Token("rx_m2", (1,)), Token("ry_m2", (0,)),
]


def test_criterion_8_bell_template_shrinks(ion_gs, ion_db3):
    naive = Circuit(2, NAIVE_BELL)
    hadamard = np.array([[1, 1], [1, -1]], dtype=np.complex128) / np.sqrt(2)
    cx = np.array([[1, 0, 0, 0],
                   [0, 1, 0, 0],
                   [0, 0, 0, 1],
                   [0, 0, 1, 0]], dtype=np.complex128)
    target = cx @ np.kron(hadamard, identity(1))
    assert equal_up_to_phase(circuit_unitary(naive, ion_gs), target), (
        "hand-written template does not realize h on qubit 0 then cx 0 1")

    shorter = []
    for seed in range(10):
        out, _ = reduce(naive, ion_gs, Strategy("dr", db=ion_db3),
                        ReducerConfig(stall_limit=200, seed=seed))
        ok = (len(out.tokens) < len(naive.tokens)
              and equal_up_to_phase(circuit_unitary(out, ion_gs), target))
        shorter.append(ok)
    assert sum(shorter) >= 9, (
        f"only {sum(shorter)}/10 seeds produced a strictly shorter "
        f"equivalent circuit from the 8-token template")


def _strip_elapsed(csv_text):
    # elapsed_ms is wall-clock measurement data; every seed-driven column
    # must still agree byte for byte
    rows = []
    for row in csv_text.strip().split("\n"):
        cols = row.split(",")
        rows.append(",".join(cols[:1] + cols[2:]))
    return "\n".join(rows)


def test_criterion_9_identical_seeds_reproduce_bytes(cliff_gs, cliff_db4,
                                                     cliff_forest):
    circ = random_circuit(cliff_gs, 2, 30, np.random.default_rng(77))
    strategies = (Strategy("rs"), Strategy("dr", db=cliff_db4),
                  Strategy("rf", db=cliff_db4, forest=cliff_forest))
    for strategy in strategies:
        cfg = ReducerConfig(stall_limit=50, seed=99)
        out1, tr1 = reduce(circ, cliff_gs, strategy, cfg)
        out2, tr2 = reduce(circ, cliff_gs, strategy, cfg)
        assert tr1.deterministic and tr2.deterministic
        assert serialize_circuit(out1).encode() == serialize_circuit(out2).encode(), (
            f"{strategy.kind}: repeated run produced different circuit bytes")
        assert _strip_elapsed(tr1.to_csv()).encode() == \
            _strip_elapsed(tr2.to_csv()).encode(), (
            f"{strategy.kind}: repeated run produced different trace rows")
