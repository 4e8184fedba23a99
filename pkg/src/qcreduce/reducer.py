"""Iterative circuit shortening.

A run repeatedly selects a contiguous subblock, looks for a strictly
shorter token sequence with the same action on the block's qubit support
(up to global phase), splices accepted replacements back in, and
interleaves commutation shuffles to expose new reducible blocks.  Three
replacement strategies share the loop: random candidate sampling ("rs"),
factorization-database lookup ("dr"), and forest-gated lookup ("rf").
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Callable, NamedTuple, Optional

import numpy as np

from .circuit import (
    Circuit,
    Subblock,
    Token,
    commute_shuffle,
    compact_to_subspace,
    circuit_unitary,
    instantiations,
    lift_from_subspace,
    select_subblock,
    splice,
    token_matrix,
    tokens_unitary,
)
from .features import FeatureExtractor, shared_extractor
from .forest import RandomForest
from .gates import GateSet
from .graph import FactorDatabase, lookup
from .unitary import DEFAULT_PHASE_TOL, apply_gate, equal_up_to_phase, identity

STRATEGY_KINDS = ("rs", "dr", "rf")
TRACE_EVENTS = ("accepted", "rejected", "gated-out", "shuffled")

# Beyond this register size the full-matrix comparison is replaced by
# overlap checks on random product states.
FULL_VERIFY_MAX_QUBITS = 12
_STATE_SAMPLES = 64
_STATE_SEED = 0x5EEDFACE

# Applied to every accepted replacement just before splicing.  The test
# suite installs a corrupting stub here to prove that the terminal
# verification catches a bad splice; production code leaves it None.
_replacement_hook: Optional[Callable[[list[Token]], list[Token]]] = None


class VerificationError(RuntimeError):
    """The reduced circuit failed the terminal equivalence check."""


@dataclass(frozen=True)
class Strategy:
    """Replacement strategy plus the artifacts it needs.

    kind is one of "rs" (random sampling, no artifacts), "dr" (database
    lookup, needs db) or "rf" (forest-gated lookup, needs db and forest).
    """

    kind: str
    db: FactorDatabase | None = None
    forest: RandomForest | None = None

    def __post_init__(self) -> None:
        if self.kind not in STRATEGY_KINDS:
            raise ValueError(f"unknown strategy kind {self.kind!r}")
        if self.kind in ("dr", "rf") and self.db is None:
            raise ValueError(f"strategy {self.kind!r} requires a factorization database")
        if self.kind == "rf" and self.forest is None:
            raise ValueError("strategy 'rf' requires a trained forest")


@dataclass(frozen=True)
class ReducerConfig:
    subblock_len_range: tuple[int, int] = (3, 7)
    rs_samples_per_block: int = 500
    shuffle_attempts_per_iter: int = 4
    stall_limit: int = 2000
    target_length: int | None = None
    wall_clock_budget: float | None = None
    tol: float = DEFAULT_PHASE_TOL
    seed: int = 0

    def __post_init__(self) -> None:
        lo, hi = self.subblock_len_range
        if lo < 1 or hi < lo:
            raise ValueError("subblock_len_range must satisfy 1 <= min <= max")
        if self.rs_samples_per_block < 1:
            raise ValueError("rs_samples_per_block must be >= 1")
        if self.shuffle_attempts_per_iter < 0:
            raise ValueError("shuffle_attempts_per_iter must be >= 0")
        if self.stall_limit < 1:
            raise ValueError("stall_limit must be >= 1")
        if self.target_length is not None and self.target_length < 0:
            raise ValueError("target_length must be >= 0")
        if self.wall_clock_budget is not None and self.wall_clock_budget <= 0:
            raise ValueError("wall_clock_budget must be positive")
        if self.tol <= 0:
            raise ValueError("tol must be positive")


class TraceEvent(NamedTuple):
    iteration: int
    elapsed_ms: float
    length: int
    event: str


@dataclass
class ReductionTrace:
    """Per-iteration event log and per-phase timing for one run.

    deterministic is False when a wall-clock budget was configured; the
    budget check depends on real time, so two runs of the same seed may
    then diverge.
    """

    events: list[TraceEvent]
    phase_seconds: dict[str, float]
    termination: str
    input_length: int
    output_length: int
    iterations: int
    deterministic: bool

    def to_csv(self) -> str:
        lines = ["iter,elapsed_ms,length,event"]
        for ev in self.events:
            lines.append(f"{ev.iteration},{ev.elapsed_ms:.3f},{ev.length},{ev.event}")
        return "\n".join(lines) + "\n"


def verify_equivalence(a: Circuit, b: Circuit, gate_set: GateSet,
                       tol: float = DEFAULT_PHASE_TOL) -> bool:
    """Whether two circuits act identically up to a global phase.

    Compares full unitaries when the register is small enough; otherwise
    checks output-state overlap on a fixed set of random product states.
    """
    if a.n_qubits != b.n_qubits:
        raise ValueError(f"qubit count mismatch: {a.n_qubits} vs {b.n_qubits}")
    n = a.n_qubits
    if n <= FULL_VERIFY_MAX_QUBITS:
        return equal_up_to_phase(circuit_unitary(a, gate_set),
                                 circuit_unitary(b, gate_set), tol)
    rng = np.random.default_rng(_STATE_SEED)
    for _ in range(_STATE_SAMPLES):
        state = _random_product_state(n, rng)
        out_a = _run_state(a, gate_set, state)
        out_b = _run_state(b, gate_set, state)
        if abs(np.vdot(out_a, out_b)) < 1.0 - tol:
            return False
    return True


def _random_product_state(n_qubits: int, rng: np.random.Generator) -> np.ndarray:
    state = np.ones(1, dtype=np.complex128)
    for _ in range(n_qubits):
        theta = rng.uniform(0.0, np.pi)
        phi = rng.uniform(0.0, 2.0 * np.pi)
        one = np.array([np.cos(theta / 2.0),
                        np.exp(1j * phi) * np.sin(theta / 2.0)], dtype=np.complex128)
        state = np.kron(state, one)
    return state


def _run_state(circuit: Circuit, gate_set: GateSet, state: np.ndarray) -> np.ndarray:
    for tok in circuit.tokens:
        d = gate_set.by_name[tok.name]
        state = apply_gate(state, d.matrix, tok.qubits, circuit.n_qubits)
    return state


def _select(circuit: Circuit, cfg: ReducerConfig,
            rng: np.random.Generator) -> tuple[Subblock, list[Token], dict[int, int]]:
    lo, hi = cfg.subblock_len_range
    block = select_subblock(circuit, rng, min(lo, len(circuit)), hi)
    compact, mapping = compact_to_subspace(block.tokens)
    return block, compact, mapping


def _rs_replacement(compact: list[Token], mapping: dict[int, int],
                    gate_set: GateSet, cfg: ReducerConfig,
                    rng: np.random.Generator) -> list[Token] | None:
    nq = len(mapping)
    target = tokens_unitary(compact, gate_set, nq)
    pool = instantiations(gate_set, nq)
    mats = [token_matrix(gate_set.by_name[t.name], t.qubits, nq) for t in pool]
    n = len(compact)
    ident = identity(nq)
    for _ in range(cfg.rs_samples_per_block):
        p = int(rng.integers(0, n))
        if p == 0:
            picks: tuple[int, ...] = ()
            candidate = ident
        else:
            picks = tuple(rng.integers(0, len(pool), size=p))
            candidate = mats[picks[0]]
            for i in picks[1:]:
                candidate = mats[i] @ candidate
        if equal_up_to_phase(candidate, target, cfg.tol):
            inverse = {sub: orig for orig, sub in mapping.items()}
            return lift_from_subspace([pool[i] for i in picks], inverse)
    return None


def _dr_replacement(circuit: Circuit, block: Subblock, compact: list[Token],
                    mapping: dict[int, int], db: FactorDatabase,
                    gate_set: GateSet, cfg: ReducerConfig) -> list[Token] | None:
    nq = len(mapping)
    if nq > db.qubit_count:
        return None
    u = tokens_unitary(compact, gate_set, nq)
    if nq < db.qubit_count:
        u = np.kron(u, identity(db.qubit_count - nq))
    fact = lookup(db, u, cfg.tol)
    if fact is None or len(fact) >= len(block.tokens):
        return None
    inverse = {sub: orig for orig, sub in mapping.items()}
    pads = sorted({q for tok in fact for q in tok.qubits if q >= nq})
    if pads:
        # A factorization may route through padding qubits; borrow original
        # qubits outside the block's support, which the replacement leaves
        # with net identity action.
        spares = [q for q in range(circuit.n_qubits) if q not in mapping]
        if len(pads) > len(spares):
            return None
        inverse.update(zip(pads, spares))
    return lift_from_subspace(fact, inverse)


def step_rs(circuit: Circuit, gate_set: GateSet, cfg: ReducerConfig,
            rng: np.random.Generator) -> tuple[Subblock, list[Token]] | None:
    """One random-sampling replacement attempt; None when nothing matched."""
    if len(circuit) == 0:
        return None
    block, compact, mapping = _select(circuit, cfg, rng)
    repl = _rs_replacement(compact, mapping, gate_set, cfg, rng)
    return None if repl is None else (block, repl)


def step_dr(circuit: Circuit, gate_set: GateSet, db: FactorDatabase,
            cfg: ReducerConfig, rng: np.random.Generator) -> tuple[Subblock, list[Token]] | None:
    """One database-lookup replacement attempt; None when the block's
    support exceeds the database register or no shorter factorization exists."""
    if len(circuit) == 0:
        return None
    block, compact, mapping = _select(circuit, cfg, rng)
    repl = _dr_replacement(circuit, block, compact, mapping, db, gate_set, cfg)
    return None if repl is None else (block, repl)


def step_rf(circuit: Circuit, gate_set: GateSet, db: FactorDatabase,
            forest: RandomForest, cfg: ReducerConfig,
            rng: np.random.Generator) -> tuple[Subblock, list[Token]] | None:
    """One forest-gated lookup attempt; the gate can only skip lookups,
    never accept anything the database would not verify."""
    if len(circuit) == 0:
        return None
    block, compact, mapping = _select(circuit, cfg, rng)
    if forest.predict_proba(shared_extractor(gate_set).extract(compact)) < forest.tau:
        return None
    repl = _dr_replacement(circuit, block, compact, mapping, db, gate_set, cfg)
    return None if repl is None else (block, repl)


def _attempt(circuit: Circuit, gate_set: GateSet, strategy: Strategy,
             cfg: ReducerConfig, rng: np.random.Generator,
             extractor: FeatureExtractor | None,
             timing: dict[str, float]) -> tuple[str, Subblock, list[Token] | None]:
    t0 = time.perf_counter()
    block, compact, mapping = _select(circuit, cfg, rng)
    timing["selection"] += time.perf_counter() - t0

    if strategy.kind == "rf":
        t0 = time.perf_counter()
        proba = strategy.forest.predict_proba(extractor.extract(compact))
        timing["forest"] += time.perf_counter() - t0
        if proba < strategy.forest.tau:
            return "gated-out", block, None

    t0 = time.perf_counter()
    if strategy.kind == "rs":
        repl = _rs_replacement(compact, mapping, gate_set, cfg, rng)
    else:
        repl = _dr_replacement(circuit, block, compact, mapping,
                               strategy.db, gate_set, cfg)
    timing["lookup"] += time.perf_counter() - t0

    if repl is None:
        return "rejected", block, None
    return "accepted", block, repl


def _check_artifacts(gate_set: GateSet, strategy: Strategy) -> None:
    if strategy.kind in ("dr", "rf"):
        if strategy.db.fingerprint != gate_set.fingerprint():
            raise ValueError("factorization database was built for a different gate set")
    if strategy.kind == "rf":
        want = FeatureExtractor(gate_set).dim
        have = strategy.forest.feature_dim
        if have != want:
            raise ValueError(
                f"forest feature dimension {have} does not match gate set ({want})")


def reduce(circuit: Circuit, gate_set: GateSet, strategy: Strategy,
           cfg: ReducerConfig | None = None) -> tuple[Circuit, ReductionTrace]:
    """Shorten a circuit while preserving its unitary up to global phase.

    Runs replacement attempts until the target length is reached, the
    stall limit passes without an acceptance, or the wall-clock budget
    (when set) expires.  The returned circuit is always verified against
    the input; failure raises VerificationError.
    """
    if cfg is None:
        cfg = ReducerConfig()
    _check_artifacts(gate_set, strategy)
    timing = {"selection": 0.0, "lookup": 0.0, "forest": 0.0, "verification": 0.0}
    events: list[TraceEvent] = []
    start = time.perf_counter()
    rng = np.random.default_rng(cfg.seed)
    extractor = shared_extractor(gate_set) if strategy.kind == "rf" else None

    original = circuit
    current = circuit
    stall = 0
    iteration = 0
    while True:
        if cfg.target_length is not None and len(current) <= cfg.target_length:
            termination = "target"
            break
        if len(current) == 0:
            termination = "empty"
            break
        if (cfg.wall_clock_budget is not None
                and time.perf_counter() - start >= cfg.wall_clock_budget):
            termination = "budget"
            break
        if stall >= cfg.stall_limit:
            termination = "stall"
            break

        iteration += 1
        event, block, repl = _attempt(current, gate_set, strategy, cfg, rng,
                                      extractor, timing)
        if repl is not None:
            if _replacement_hook is not None:
                repl = _replacement_hook(repl)
            current = splice(current, block.start, len(block.tokens), repl)
            stall = 0
        else:
            stall += 1
        events.append(TraceEvent(iteration, _elapsed_ms(start), len(current), event))

        if cfg.shuffle_attempts_per_iter > 0 and len(current) >= 2:
            t0 = time.perf_counter()
            shuffled = commute_shuffle(current, rng, gate_set,
                                       cfg.shuffle_attempts_per_iter)
            timing["selection"] += time.perf_counter() - t0
            if shuffled.tokens != current.tokens:
                current = shuffled
                events.append(TraceEvent(iteration, _elapsed_ms(start),
                                         len(current), "shuffled"))

    t0 = time.perf_counter()
    ok = verify_equivalence(original, current, gate_set, cfg.tol)
    timing["verification"] += time.perf_counter() - t0
    if not ok:
        raise VerificationError(
            f"reduced circuit is not equivalent to its input at tol={cfg.tol}")
    trace = ReductionTrace(
        events=events,
        phase_seconds=timing,
        termination=termination,
        input_length=len(original),
        output_length=len(current),
        iterations=iteration,
        deterministic=cfg.wall_clock_budget is None,
    )
    return current, trace


def _elapsed_ms(start: float) -> float:
    return (time.perf_counter() - start) * 1000.0
