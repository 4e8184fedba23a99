"""Breadth-first enumeration of the unitaries a gate set reaches within a
depth bound, and a persistent shortest-factorization database.

Nodes are unitaries distinct up to global phase; edges are single-token
applications. Because the frontier grows level by level, the factorization
stored for a node is a shortest word by construction.
"""
from __future__ import annotations

import struct
import zlib
from array import array
from bisect import bisect_right
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple

import numpy as np

from .circuit import Token, instantiations, token_matrix
from .gates import GateSet
from .unitary import (
    DEFAULT_PHASE_TOL,
    canonical_key,
    canonical_keys,
    equal_up_to_phase,
    identity,
)

DB_MAGIC = b"QCRDB1"
# transient product-buffer budget per expansion chunk; crude memory knob
_CHUNK_BYTES = 1 << 26

ProductEntry = tuple[np.ndarray, tuple[Token, ...]]


@dataclass(frozen=True)
class GraphNode:
    unitary: np.ndarray
    key: bytes
    depth: int
    shortest_factorization: tuple[Token, ...]


class GraphStats(NamedTuple):
    nodes: int
    edges: int
    per_depth: list[int]


def _bucket_candidates(bucket) -> tuple[int, ...]:
    if bucket is None:
        return ()
    if type(bucket) is int:
        return (bucket,)
    return tuple(bucket)


def _bucket_add(buckets: dict, h: int, idx: int) -> None:
    cur = buckets.get(h)
    if cur is None:
        buckets[h] = idx
    elif type(cur) is int:
        buckets[h] = [cur, idx]
    else:
        cur.append(idx)


class ComputeGraph:
    """Levelled node store: `levels[d]` stacks the unitaries first reached at
    depth d, so a node's matrix costs no per-object overhead. Factorizations
    are parent-pointer walks, not stored words."""

    def __init__(self, gate_set: GateSet, n_qubits: int, depth_bound: int,
                 pool: list[Token], levels: list[np.ndarray], offsets: list[int],
                 parents: array, via: array, edges: array, buckets: dict):
        self.gate_set = gate_set
        self.n_qubits = n_qubits
        self.depth_bound = depth_bound
        self.pool = pool
        self.levels = levels
        self.offsets = offsets  # offsets[d] = index of first depth-d node; last = node count
        self._parents = parents
        self._via = via
        self._edges = edges  # flat (from, token, to) triples
        self._buckets = buckets

    @property
    def n_nodes(self) -> int:
        return self.offsets[-1]

    @property
    def n_edges(self) -> int:
        return len(self._edges) // 3

    def depth_of(self, idx: int) -> int:
        return bisect_right(self.offsets, idx) - 1

    def unitary_of(self, idx: int) -> np.ndarray:
        d = self.depth_of(idx)
        return self.levels[d][idx - self.offsets[d]]

    def factorization(self, idx: int) -> list[Token]:
        word: list[Token] = []
        while idx > 0:
            word.append(self.pool[self._via[idx]])
            idx = self._parents[idx]
        word.reverse()
        return word

    def node(self, idx: int) -> GraphNode:
        u = self.unitary_of(idx)
        return GraphNode(u, canonical_key(u), self.depth_of(idx),
                         tuple(self.factorization(idx)))

    def edge_triples(self):
        """Yield (from-index, Token, to-index) for every edge."""
        e = self._edges
        for i in range(0, len(e), 3):
            yield e[i], self.pool[e[i + 1]], e[i + 2]

    def find(self, u: np.ndarray, tol: float = DEFAULT_PHASE_TOL) -> int:
        """Node index holding a phase-equivalent of u, or -1."""
        for cand in _bucket_candidates(self._buckets.get(hash(canonical_key(u)))):
            if equal_up_to_phase(u, self.unitary_of(cand), tol):
                return cand
        return -1


def build_graph(gate_set: GateSet, n_qubits: int, depth: int,
                node_cap: int = 10_000_000) -> ComputeGraph:
    """Level-by-level expansion from the identity root.

    Every (frontier node, instantiated token) product yields exactly one edge:
    to an existing node when a key-bucket candidate passes phase verification,
    otherwise to a fresh node whose factorization extends the parent's. Keys
    only bucket candidates; equality is always confirmed on the matrices.
    """
    if depth < 1:
        raise ValueError("depth must be >= 1")
    pool = instantiations(gate_set, n_qubits)
    if not pool:
        raise ValueError(f"gate set has no token that fits on {n_qubits} qubits")
    dim = 2**n_qubits
    tok_mats = np.stack([token_matrix(gate_set.by_name[t.name], t.qubits, n_qubits)
                         for t in pool])
    n_tok = len(pool)

    root = identity(n_qubits)[None, :, :]
    levels = [root]
    offsets = [0, 1]
    parents = array("i", [-1])
    via = array("i", [-1])
    edges = array("i")
    buckets: dict = {hash(canonical_keys(root)[0]): 0}
    n = 1

    chunk = max(1, _CHUNK_BYTES // (n_tok * dim * dim * 16))

    def mat_of(idx: int, pending_base: int, pending: list) -> np.ndarray:
        if idx >= pending_base:
            return pending[idx - pending_base]
        d = bisect_right(offsets, idx) - 1
        return levels[d][idx - offsets[d]]

    for lv in range(depth):
        frontier = levels[lv]
        f_count = frontier.shape[0]
        if f_count == 0:
            break
        base = offsets[lv]
        pending: list[np.ndarray] = []
        pending_base = n
        for c0 in range(0, f_count, chunk):
            fchunk = frontier[c0:c0 + chunk]
            prods = np.matmul(tok_mats[None, :, :, :], fchunk[:, None, :, :])
            flat = prods.reshape(-1, dim, dim)
            keys = canonical_keys(flat)
            for j, key in enumerate(keys):
                parent = base + c0 + j // n_tok
                tok = j % n_tok
                h = hash(key)
                target = -1
                for cand in _bucket_candidates(buckets.get(h)):
                    if equal_up_to_phase(flat[j], mat_of(cand, pending_base, pending)):
                        target = cand
                        break
                if target < 0:
                    if n >= node_cap:
                        raise RuntimeError(
                            f"node cap {node_cap} exceeded at depth {lv + 1}")
                    target = n
                    pending.append(flat[j].copy())
                    parents.append(parent)
                    via.append(tok)
                    _bucket_add(buckets, h, n)
                    n += 1
                edges.append(parent)
                edges.append(tok)
                edges.append(target)
        if not pending:
            break
        levels.append(np.stack(pending))
        offsets.append(n)

    return ComputeGraph(gate_set, n_qubits, depth, pool, levels, offsets,
                        parents, via, edges, buckets)


def graph_stats(g: ComputeGraph) -> GraphStats:
    per_depth = [lvl.shape[0] for lvl in g.levels]
    return GraphStats(g.n_nodes, g.n_edges, per_depth)


class FactorDatabase:
    """Immutable key -> [(verification unitary, shortest factorization)] map.

    A key bucket holds more than one entry only when distinct unitaries
    collide on the rounded key; verification picks the right one.
    """

    def __init__(self, qubit_count: int, depth_bound: int, fingerprint: bytes,
                 entries: dict[bytes, list[ProductEntry]]):
        if len(fingerprint) != 32:
            raise ValueError("fingerprint must be 32 bytes")
        self.qubit_count = qubit_count
        self.depth_bound = depth_bound
        self.fingerprint = fingerprint
        self.entries = entries

    def __len__(self):
        return sum(len(b) for b in self.entries.values())


def extract_database(g: ComputeGraph) -> FactorDatabase:
    entries: dict[bytes, list[ProductEntry]] = {}
    for lv, level in enumerate(g.levels):
        if level.shape[0] == 0:
            continue
        keys = canonical_keys(level)
        for i, key in enumerate(keys):
            fact = tuple(g.factorization(g.offsets[lv] + i))
            entries.setdefault(key, []).append((level[i].copy(), fact))
    return FactorDatabase(g.n_qubits, g.depth_bound, g.gate_set.fingerprint(), entries)


def lookup(db: FactorDatabase, u: np.ndarray,
           tol: float = DEFAULT_PHASE_TOL) -> list[Token] | None:
    """Shortest stored factorization of u (up to phase), or None.

    A returned word always reproduces u: bucket hits are verified against the
    stored unitary before the factorization is released.
    """
    u = np.asarray(u, dtype=np.complex128)
    dim = 2**db.qubit_count
    if u.shape != (dim, dim):
        raise ValueError(f"query shape {u.shape} does not match {db.qubit_count} qubits")
    bucket = db.entries.get(canonical_key(u))
    if bucket is not None:
        for mat, fact in bucket:
            if equal_up_to_phase(u, mat, tol):
                return list(fact)
    return None


def save_database(db: FactorDatabase, path) -> None:
    out = bytearray()
    out += DB_MAGIC
    out += struct.pack("<II", db.qubit_count, db.depth_bound)
    out += db.fingerprint
    out += struct.pack("<Q", len(db))
    for key, bucket in db.entries.items():
        for mat, fact in bucket:
            out += struct.pack("<I", len(key))
            out += key
            out += struct.pack("<I", len(fact))
            for t in fact:
                name = t.name.encode()
                out += struct.pack("<H", len(name))
                out += name
                out += struct.pack(f"<H{len(t.qubits)}H", len(t.qubits), *t.qubits)
            # complex128 memory layout is the wire format: little-endian
            # (real, imag) float64 pairs, row-major
            out += np.ascontiguousarray(mat, dtype="<c16").tobytes()
    out += struct.pack("<I", zlib.crc32(bytes(out)) & 0xFFFFFFFF)
    Path(path).write_bytes(bytes(out))


def load_database(path, gate_set: GateSet) -> FactorDatabase:
    raw = Path(path).read_bytes()
    if len(raw) < len(DB_MAGIC) + 4:
        raise ValueError("truncated database file")
    if raw[:len(DB_MAGIC)] != DB_MAGIC:
        raise ValueError("not a QCRDB1 database (bad magic)")
    body = raw[:-4]
    (crc,) = struct.unpack("<I", raw[-4:])
    if zlib.crc32(body) & 0xFFFFFFFF != crc:
        raise ValueError("database checksum mismatch")
    try:
        off = len(DB_MAGIC)
        qubit_count, depth_bound = struct.unpack_from("<II", body, off)
        off += 8
        fingerprint = bytes(body[off:off + 32])
        off += 32
        if fingerprint != gate_set.fingerprint():
            raise ValueError("database was built for a different gate set "
                             "(fingerprint mismatch)")
        (n_entries,) = struct.unpack_from("<Q", body, off)
        off += 8
        dim = 2**qubit_count
        entries: dict[bytes, list[ProductEntry]] = {}
        for _ in range(n_entries):
            (key_len,) = struct.unpack_from("<I", body, off)
            off += 4
            key = bytes(body[off:off + key_len])
            off += key_len
            (fact_len,) = struct.unpack_from("<I", body, off)
            off += 4
            fact = []
            for _ in range(fact_len):
                (name_len,) = struct.unpack_from("<H", body, off)
                off += 2
                name = body[off:off + name_len].decode()
                off += name_len
                (nq,) = struct.unpack_from("<H", body, off)
                off += 2
                qubits = struct.unpack_from(f"<{nq}H", body, off)
                off += 2 * nq
                fact.append(Token(name, tuple(int(q) for q in qubits)))
            mat = np.frombuffer(body, dtype="<c16", count=dim * dim,
                                offset=off).reshape(dim, dim).copy()
            off += dim * dim * 16
            entries.setdefault(key, []).append((mat, tuple(fact)))
        if off != len(body):
            raise ValueError("trailing bytes after final database entry")
    except (struct.error, UnicodeDecodeError) as exc:
        raise ValueError(f"truncated or corrupt database file: {exc}") from None
    return FactorDatabase(qubit_count, depth_bound, fingerprint, entries)
