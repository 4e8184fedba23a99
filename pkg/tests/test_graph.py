import itertools

import numpy as np
import pytest

from qcreduce.circuit import Token, instantiations, tokens_unitary
from qcreduce.gates import PRESETS, parse_gate_set
from qcreduce.graph import (
    build_graph,
    extract_database,
    graph_stats,
    load_database,
    lookup,
    save_database,
)
from qcreduce.unitary import embed, equal_up_to_phase, identity

HS = parse_gate_set("h h arity 1\ns s arity 1")
X_ONLY = parse_gate_set("x x arity 1")
CLIFF = PRESETS["clifford_t"]()


def brute_force_classes(gate_set, n_qubits, max_len):
    """All phase-distinct unitaries reachable by words up to max_len, with the
    minimum word length for each; dedup by pairwise phase comparison only."""
    pool = instantiations(gate_set, n_qubits)
    reps = [identity(n_qubits)]
    min_len = [0]
    for length in range(1, max_len + 1):
        for word in itertools.product(pool, repeat=length):
            u = tokens_unitary(word, gate_set, n_qubits)
            if not any(equal_up_to_phase(u, r) for r in reps):
                reps.append(u)
                min_len.append(length)
    return reps, min_len


def test_x_depth3_hand_enumeration():
    g = build_graph(X_ONLY, 1, 3)
    stats = graph_stats(g)
    assert stats.nodes == 2
    assert stats.edges == 2
    assert stats.per_depth == [1, 1]
    assert g.factorization(1) == [Token("x", (0,))]
    triples = [(a, t.name, b) for a, t, b in g.edge_triples()]
    assert triples == [(0, "x", 1), (1, "x", 0)]


def test_h_depth5_involution_cycle():
    g = build_graph(parse_gate_set("h h arity 1"), 1, 5)
    assert graph_stats(g)[:2] == (2, 2)


def test_hs_depth6_matches_brute_force():
    reps, min_len = brute_force_classes(HS, 1, 6)
    g = build_graph(HS, 1, 6)
    assert g.n_nodes == len(reps)
    # every graph node matches exactly one oracle class, at the same depth
    for idx in range(g.n_nodes):
        u = g.unitary_of(idx)
        matches = [k for k, r in enumerate(reps) if equal_up_to_phase(u, r)]
        assert len(matches) == 1
        assert g.depth_of(idx) == min_len[matches[0]]
        assert len(g.factorization(idx)) == min_len[matches[0]]


def test_hs_node_count_beats_word_count_for_deep_graphs():
    for d in (4, 5, 6):
        g = build_graph(HS, 1, d)
        assert g.n_nodes < 2**d + 1


def test_no_two_nodes_phase_equal():
    for gs, nq, depth in ((HS, 1, 6), (CLIFF, 2, 2)):
        g = build_graph(gs, nq, depth)
        mats = [g.unitary_of(i) for i in range(g.n_nodes)]
        for i in range(len(mats)):
            for j in range(i + 1, len(mats)):
                assert not equal_up_to_phase(mats[i], mats[j])


def test_every_edge_is_a_single_token_application():
    g = build_graph(HS, 1, 4)
    for a, tok, b in g.edge_triples():
        gate = g.gate_set.by_name[tok.name].matrix
        lhs = embed(gate, tok.qubits, g.n_qubits) @ g.unitary_of(a)
        assert equal_up_to_phase(lhs, g.unitary_of(b))


def test_factorizations_compose_to_node_unitaries():
    g = build_graph(CLIFF, 2, 3)
    rng = np.random.default_rng(0)
    for idx in rng.integers(0, g.n_nodes, size=30):
        node = g.node(int(idx))
        assert len(node.shortest_factorization) == node.depth
        u = tokens_unitary(node.shortest_factorization, CLIFF, 2)
        assert equal_up_to_phase(u, node.unitary)


def test_stats_histogram_sums_to_nodes():
    g = build_graph(CLIFF, 2, 2)
    stats = graph_stats(g)
    assert sum(stats.per_depth) == stats.nodes
    assert stats.nodes <= stats.edges + 1
    assert stats.per_depth[1] == len(instantiations(CLIFF, 2))


def test_build_graph_errors():
    with pytest.raises(ValueError, match="depth"):
        build_graph(HS, 1, 0)
    with pytest.raises(ValueError, match="no token"):
        build_graph(parse_gate_set("cz cz arity 2"), 1, 2)
    with pytest.raises(RuntimeError, match="node cap"):
        build_graph(HS, 1, 6, node_cap=3)


def test_extract_database_shape():
    g = build_graph(HS, 1, 6)
    db = extract_database(g)
    assert len(db) == g.n_nodes
    assert db.qubit_count == 1
    assert db.depth_bound == 6
    assert db.fingerprint == HS.fingerprint()
    assert lookup(db, identity(1)) == []


def test_lookup_phase_invariance_and_soundness():
    g = build_graph(CLIFF, 2, 3)
    db = extract_database(g)
    rng = np.random.default_rng(1)
    pool = instantiations(CLIFF, 2)
    for _ in range(200):
        length = int(rng.integers(1, 4))
        word = [pool[i] for i in rng.integers(0, len(pool), size=length)]
        u = tokens_unitary(word, CLIFF, 2)
        fact = lookup(db, np.exp(1j * rng.uniform(0, 2 * np.pi)) * u)
        assert fact is not None
        assert len(fact) <= length
        assert equal_up_to_phase(tokens_unitary(fact, CLIFF, 2), u)


def test_lookup_miss_and_dimension_check():
    db = extract_database(build_graph(HS, 1, 3))
    rng = np.random.default_rng(2)
    z = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
    q, r = np.linalg.qr(z)
    u = q * (np.diag(r) / np.abs(np.diag(r)))
    assert lookup(db, u) is None
    with pytest.raises(ValueError, match="shape"):
        lookup(db, identity(2))


def test_database_round_trip_bytes(tmp_path):
    db = extract_database(build_graph(HS, 1, 6))
    p1, p2 = tmp_path / "a.qcrdb", tmp_path / "b.qcrdb"
    save_database(db, p1)
    again = load_database(p1, HS)
    assert len(again) == len(db)
    assert list(again.entries.keys()) == list(db.entries.keys())
    for key in db.entries:
        for (m1, f1), (m2, f2) in zip(db.entries[key], again.entries[key]):
            assert f1 == f2
            assert m1.tobytes() == m2.tobytes()
    save_database(again, p2)
    assert p1.read_bytes() == p2.read_bytes()


def test_database_load_rejects_corruption(tmp_path):
    db = extract_database(build_graph(HS, 1, 4))
    path = tmp_path / "db.qcrdb"
    save_database(db, path)
    raw = bytearray(path.read_bytes())

    bad = tmp_path / "bad.qcrdb"
    bad.write_bytes(raw[: len(raw) // 2])
    with pytest.raises(ValueError, match="checksum|truncated"):
        load_database(bad, HS)

    flipped = bytearray(raw)
    flipped[len(raw) // 2] ^= 0xFF
    bad.write_bytes(flipped)
    with pytest.raises(ValueError, match="checksum"):
        load_database(bad, HS)

    bad.write_bytes(b"NOTADB" + raw[6:])
    with pytest.raises(ValueError, match="magic"):
        load_database(bad, HS)

    with pytest.raises(ValueError, match="fingerprint"):
        load_database(path, X_ONLY)


def test_single_gate_database_round_trips(tmp_path):
    db = extract_database(build_graph(X_ONLY, 1, 1))
    path = tmp_path / "tiny.qcrdb"
    save_database(db, path)
    again = load_database(path, X_ONLY)
    assert len(again) == 2
    assert lookup(again, identity(1)) == []
    x = X_ONLY.by_name["x"].matrix
    assert lookup(again, x) == [Token("x", (0,))]
