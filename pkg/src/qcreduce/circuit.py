"""Circuits as flat token sequences over a gate set.

A token is a gate name plus the ordered qubit indices it touches; a circuit
is a qubit count plus a token list, applied left to right (tokens[0] first).
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .gates import GateSet, TokenDef
from .unitary import compose, embed, identity

COMMUTE_ATOL = 1e-9


@dataclass(frozen=True)
class Token:
    name: str
    qubits: tuple[int, ...]

    def __str__(self):
        return " ".join([self.name, *map(str, self.qubits)])


@dataclass(frozen=True)
class Circuit:
    n_qubits: int
    tokens: tuple[Token, ...]

    def __post_init__(self):
        if not isinstance(self.tokens, tuple):
            object.__setattr__(self, "tokens", tuple(self.tokens))

    def __len__(self):
        return len(self.tokens)


def parse_circuit(text: str) -> Circuit:
    """Parse the text format: a ``qubits <N>`` header, then one token per line."""
    n_qubits = None
    tokens: list[Token] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if n_qubits is None:
            if parts[0] != "qubits" or len(parts) != 2:
                raise ValueError(f"line {lineno}: expected 'qubits <N>' header, got {raw!r}")
            n_qubits = int(parts[1])
            if n_qubits < 1:
                raise ValueError(f"line {lineno}: qubit count must be >= 1")
            continue
        try:
            qubits = tuple(int(q) for q in parts[1:])
        except ValueError:
            raise ValueError(f"line {lineno}: malformed qubit index in {raw!r}") from None
        if not qubits:
            raise ValueError(f"line {lineno}: token {parts[0]!r} names no qubits")
        if len(set(qubits)) != len(qubits):
            raise ValueError(f"line {lineno}: repeated qubit in {raw!r}")
        if any(q < 0 or q >= n_qubits for q in qubits):
            raise ValueError(f"line {lineno}: qubit out of range in {raw!r}")
        tokens.append(Token(parts[0], qubits))
    if n_qubits is None:
        raise ValueError("missing 'qubits <N>' header")
    return Circuit(n_qubits, tuple(tokens))


def serialize_circuit(circuit: Circuit) -> str:
    lines = [f"qubits {circuit.n_qubits}"]
    lines.extend(str(t) for t in circuit.tokens)
    return "\n".join(lines) + "\n"


def token_matrix(d: TokenDef, qubits: tuple[int, ...], n_qubits: int) -> np.ndarray:
    """Full-register matrix of one token, memoized on the TokenDef."""
    key = (qubits, n_qubits)
    m = d._embed_cache.get(key)
    if m is None:
        m = embed(d.matrix, qubits, n_qubits)
        m.setflags(write=False)
        d._embed_cache[key] = m
    return m


def _resolve(gate_set: GateSet, token: Token) -> TokenDef:
    d = gate_set.by_name.get(token.name)
    if d is None:
        raise ValueError(f"token {token.name!r} is not in the gate set")
    if d.arity != len(token.qubits):
        raise ValueError(f"token {token.name!r} takes {d.arity} qubits, got {len(token.qubits)}")
    return d


def circuit_unitary(circuit: Circuit, gate_set: GateSet) -> np.ndarray:
    """Product of the embedded token matrices, tokens[0] applied first."""
    mats = [token_matrix(_resolve(gate_set, t), t.qubits, circuit.n_qubits) for t in circuit.tokens]
    return compose(mats, dim=2**circuit.n_qubits)


def tokens_unitary(tokens, gate_set: GateSet, n_qubits: int) -> np.ndarray:
    mats = [token_matrix(_resolve(gate_set, t), t.qubits, n_qubits) for t in tokens]
    return compose(mats, dim=2**n_qubits)


@dataclass(frozen=True)
class Subblock:
    start: int
    tokens: tuple[Token, ...]

    def __len__(self):
        return len(self.tokens)


def select_subblock(circuit: Circuit, rng: np.random.Generator,
                    min_len: int, max_len: int) -> Subblock:
    """Uniform contiguous window: length n ~ U[min_len, min(max_len, L)],
    then start ~ U[0, L - n]. Requires L >= min_len."""
    length = len(circuit)
    if length < min_len:
        raise ValueError(f"circuit length {length} < minimum subblock length {min_len}")
    n = int(rng.integers(min_len, min(max_len, length) + 1))
    start = int(rng.integers(0, length - n + 1))
    return Subblock(start, circuit.tokens[start:start + n])


def splice(circuit: Circuit, start: int, old_len: int, replacement) -> Circuit:
    tokens = circuit.tokens[:start] + tuple(replacement) + circuit.tokens[start + old_len:]
    return Circuit(circuit.n_qubits, tokens)


def support(tokens) -> set[int]:
    out: set[int] = set()
    for t in tokens:
        out.update(t.qubits)
    return out


def compact_to_subspace(tokens) -> tuple[list[Token], dict[int, int]]:
    """Relabel qubits to 0..k-1 in order of first appearance.

    Returns the relabeled tokens and the original->compact mapping.
    """
    mapping: dict[int, int] = {}
    out: list[Token] = []
    for t in tokens:
        for q in t.qubits:
            if q not in mapping:
                mapping[q] = len(mapping)
        out.append(Token(t.name, tuple(mapping[q] for q in t.qubits)))
    return out, mapping


def lift_from_subspace(tokens, inverse_map: dict[int, int]) -> list[Token]:
    """Undo a compaction: map compact indices back through inverse_map."""
    return [Token(t.name, tuple(inverse_map[q] for q in t.qubits)) for t in tokens]


def commutes(a: Token, b: Token, gate_set: GateSet) -> bool:
    """True when swapping adjacent a, b leaves the unitary unchanged.

    Disjoint supports commute trivially; otherwise the commutator is checked
    numerically on the joint support.
    """
    if not set(a.qubits) & set(b.qubits):
        return True
    da, db = _resolve(gate_set, a), _resolve(gate_set, b)
    (ca, cb), mapping = compact_to_subspace([a, b])
    k = len(mapping)
    ma = token_matrix(da, ca.qubits, k)
    mb = token_matrix(db, cb.qubits, k)
    return bool(np.linalg.norm(ma @ mb - mb @ ma) <= COMMUTE_ATOL)


def commute_shuffle(circuit: Circuit, rng: np.random.Generator,
                    gate_set: GateSet, attempts: int) -> Circuit:
    """Attempt `attempts` random adjacent swaps, applying only commuting ones.

    Every attempt consumes one rng draw whether or not the swap applies, so
    the draw sequence depends only on the circuit length.
    """
    if len(circuit) < 2:
        return circuit
    tokens = list(circuit.tokens)
    for _ in range(attempts):
        i = int(rng.integers(0, len(tokens) - 1))
        if commutes(tokens[i], tokens[i + 1], gate_set):
            tokens[i], tokens[i + 1] = tokens[i + 1], tokens[i]
    return Circuit(circuit.n_qubits, tuple(tokens))


def instantiations(gate_set: GateSet, n_qubits: int) -> list[Token]:
    """Every token the gate set admits on an n-qubit register.

    Defs in gate-set order; for each def, qubit tuples in lexicographic
    order over ordered arrangements (both (0,1) and (1,0) for arity 2).
    Memoized per gate set; treat the returned list as read-only.
    """
    cache = gate_set.__dict__.setdefault("_instantiation_cache", {})
    pool = cache.get(n_qubits)
    if pool is None:
        pool = []
        for d in gate_set.defs:
            if d.arity > n_qubits:
                continue
            for qubits in itertools.permutations(range(n_qubits), d.arity):
                pool.append(Token(d.name, qubits))
        cache[n_qubits] = pool
    return pool


def random_circuit(gate_set: GateSet, n_qubits: int, length: int,
                   rng: np.random.Generator) -> Circuit:
    """Uniform i.i.d. tokens from instantiations(gate_set, n_qubits)."""
    pool = instantiations(gate_set, n_qubits)
    if not pool:
        raise ValueError(f"gate set has no token that fits on {n_qubits} qubits")
    picks = rng.integers(0, len(pool), size=length)
    return Circuit(n_qubits, tuple(pool[i] for i in picks))
