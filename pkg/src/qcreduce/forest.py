"""Decision trees and a bagged random forest, written out by hand.

The forest answers one question: is this block worth a database lookup?
Trees are stored as flat arrays in pre-order so the whole forest can be
packed into a handful of contiguous buffers for fast traversal.
"""
from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from math import ceil, sqrt
from pathlib import Path

import numpy as np

from .circuit import compact_to_subspace, random_circuit, select_subblock, tokens_unitary
from .features import FeatureExtractor
from .gates import GateSet
from .graph import FactorDatabase, lookup
from .unitary import identity

try:
    from numba import njit
    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    _HAVE_NUMBA = False

FOREST_MAGIC = "QCRRF1"
# gains this small are float noise from the entropy cancellation, not signal
_GAIN_EPS = 1e-12


def shannon_entropy(probs) -> float:
    """-sum p*log2(p) with 0*log2(0) taken as 0. Input must sum to 1."""
    p = np.asarray(probs, dtype=np.float64)
    if p.ndim != 1 or p.size == 0:
        raise ValueError("probabilities must be a non-empty 1-d sequence")
    if np.any(p < -1e-12) or np.any(p > 1 + 1e-12):
        raise ValueError("probabilities must lie in [0, 1]")
    if abs(float(p.sum()) - 1.0) > 1e-9:
        raise ValueError(f"probabilities sum to {p.sum()!r}, not 1")
    nz = p[p > 0]
    return float(-(nz * np.log2(nz)).sum())


def _label_entropy(labels: list) -> float:
    if not labels:
        return 0.0
    counts = np.array(sorted(Counter(labels).values()), dtype=np.float64)
    return shannon_entropy(counts / counts.sum())


def info_gain(parent_labels, partition) -> float:
    """Parent entropy minus size-weighted child entropies."""
    parent = list(parent_labels)
    if not parent:
        raise ValueError("empty parent label set")
    children = [list(child) for child in partition]
    merged: Counter = Counter()
    for child in children:
        merged.update(child)
    if merged != Counter(parent):
        raise ValueError("children do not partition the parent labels")
    n = len(parent)
    h = _label_entropy(parent)
    return h - sum(len(c) / n * _label_entropy(c) for c in children)


def _binary_entropy(pos: np.ndarray, total: np.ndarray) -> np.ndarray:
    """Entropy of (pos, total-pos) count pairs, elementwise, 0*log0 = 0."""
    pos = pos.astype(np.float64)
    total = total.astype(np.float64)
    neg = total - pos
    h = np.zeros_like(total)
    m = pos > 0
    h[m] -= pos[m] / total[m] * np.log2(pos[m] / total[m])
    m = neg > 0
    h[m] -= neg[m] / total[m] * np.log2(neg[m] / total[m])
    return h


def best_split(X: np.ndarray, y: np.ndarray, feature_indices):
    """Highest-gain (feature, midpoint threshold, gain) over the candidates.

    Thresholds are midpoints between consecutive distinct sorted values.
    Ties go to the lowest feature index, then the lowest threshold; returns
    None when no candidate has positive gain.
    """
    n = y.size
    if n < 2:
        return None
    total_pos = int(y.sum())
    h_parent = float(_binary_entropy(np.array([total_pos]), np.array([n]))[0])
    best = None
    for f in sorted(int(i) for i in feature_indices):
        v = X[:, f]
        order = np.argsort(v, kind="stable")
        sv = v[order]
        cuts = np.nonzero(sv[1:] != sv[:-1])[0]
        if cuts.size == 0:
            continue
        pos_prefix = np.cumsum(y[order])
        n_left = cuts + 1
        p_left = pos_prefix[cuts]
        n_right = n - n_left
        p_right = total_pos - p_left
        gains = h_parent - (n_left * _binary_entropy(p_left, n_left)
                            + n_right * _binary_entropy(p_right, n_right)) / n
        j = int(np.argmax(gains))  # first max: lowest threshold wins ties
        if gains[j] > _GAIN_EPS and (best is None or gains[j] > best[2]):
            thr = float((sv[cuts[j]] + sv[cuts[j] + 1]) / 2)
            best = (f, thr, float(gains[j]))
    return best


@dataclass
class ForestParams:
    n_trees: int = 50
    max_depth: int = 12
    features_per_split: int | None = None  # None: ceil(sqrt(feature dim))
    tau: float = 0.3


@dataclass(frozen=True)
class LabeledSample:
    features: np.ndarray
    label: int  # 1 reducible, 0 irreducible
    provenance: str = "database-oracle"


@dataclass
class DecisionTree:
    """Flat pre-order arrays; feature == -1 marks a leaf."""
    feature: np.ndarray      # int32
    threshold: np.ndarray    # float64
    left: np.ndarray         # int32, -1 at leaves
    right: np.ndarray        # int32, -1 at leaves
    n_reducible: np.ndarray  # int32, populated at leaves
    n_irreducible: np.ndarray

    @property
    def n_nodes(self) -> int:
        return int(self.feature.size)

    def leaf_for(self, x) -> int:
        node = 0
        while self.feature[node] >= 0:
            if x[self.feature[node]] <= self.threshold[node]:
                node = self.left[node]
            else:
                node = self.right[node]
        return node

    def depth(self) -> int:
        depths = np.zeros(self.n_nodes, dtype=np.int32)
        top = 0
        for i in range(self.n_nodes):
            if self.feature[i] >= 0:
                depths[self.left[i]] = depths[i] + 1
                depths[self.right[i]] = depths[i] + 1
            elif depths[i] > top:
                top = int(depths[i])
        return top


class _TreeBuilder:
    def __init__(self):
        self.feature: list[int] = []
        self.threshold: list[float] = []
        self.left: list[int] = []
        self.right: list[int] = []
        self.n_red: list[int] = []
        self.n_irr: list[int] = []

    def add(self, feat, thr, pos, neg) -> int:
        idx = len(self.feature)
        self.feature.append(feat)
        self.threshold.append(thr)
        self.left.append(-1)
        self.right.append(-1)
        self.n_red.append(pos)
        self.n_irr.append(neg)
        return idx

    def finish(self) -> DecisionTree:
        return DecisionTree(
            np.array(self.feature, dtype=np.int32),
            np.array(self.threshold, dtype=np.float64),
            np.array(self.left, dtype=np.int32),
            np.array(self.right, dtype=np.int32),
            np.array(self.n_red, dtype=np.int32),
            np.array(self.n_irr, dtype=np.int32),
        )


def _grow(b: _TreeBuilder, X, y, depth, params, k, rng) -> int:
    pos = int(y.sum())
    neg = y.size - pos
    if depth >= params.max_depth or pos == 0 or neg == 0:
        return b.add(-1, 0.0, pos, neg)
    cand = rng.choice(X.shape[1], size=k, replace=False)
    split = best_split(X, y, cand)
    if split is None:
        return b.add(-1, 0.0, pos, neg)
    f, thr, _ = split
    idx = b.add(f, thr, 0, 0)
    mask = X[:, f] <= thr
    l = _grow(b, X[mask], y[mask], depth + 1, params, k, rng)
    r = _grow(b, X[~mask], y[~mask], depth + 1, params, k, rng)
    b.left[idx] = l
    b.right[idx] = r
    return idx


def _as_arrays(samples) -> tuple[np.ndarray, np.ndarray]:
    samples = list(samples)
    if not samples:
        raise ValueError("no training samples")
    X = np.stack([np.asarray(s.features, dtype=np.float64) for s in samples])
    y = np.array([int(s.label) for s in samples], dtype=np.int8)
    return X, y


def _features_per_split(params: ForestParams, dim: int) -> int:
    k = params.features_per_split
    if k is None:
        k = ceil(sqrt(dim))
    if not 1 <= k <= dim:
        raise ValueError(f"features_per_split {k} out of range for {dim} features")
    return k


def train_tree(samples, params: ForestParams, rng: np.random.Generator) -> DecisionTree:
    X, y = _as_arrays(samples)
    b = _TreeBuilder()
    _grow(b, X, y, 0, params, _features_per_split(params, X.shape[1]), rng)
    return b.finish()


def train_forest(samples, params: ForestParams, rng: np.random.Generator) -> "RandomForest":
    X, y = _as_arrays(samples)
    if y.min() == y.max():
        raise ValueError("training set contains a single class")
    k = _features_per_split(params, X.shape[1])
    trees = []
    for stream in rng.spawn(params.n_trees):
        pick = stream.integers(0, y.size, size=y.size)
        b = _TreeBuilder()
        _grow(b, X[pick], y[pick], 0, params, k, stream)
        trees.append(b.finish())
    return RandomForest(trees, X.shape[1], params.tau)


if _HAVE_NUMBA:
    @njit("float64(int64[::1], int32[::1], float64[::1], int32[::1], int32[::1], float64[::1], float64[::1])",
          cache=True, nogil=True)
    def _vote_one(offsets, feat, thr, left, right, vote, x):
        total = 0.0
        n_trees = offsets.shape[0] - 1
        for t in range(n_trees):
            node = offsets[t]
            f = feat[node]
            while f >= 0:
                if x[f] <= thr[node]:
                    node = left[node]
                else:
                    node = right[node]
                f = feat[node]
            total += vote[node]
        return total / n_trees

    @njit("float64[::1](int64[::1], int32[::1], float64[::1], int32[::1], int32[::1], float64[::1], float64[:, ::1])",
          cache=True, nogil=True)
    def _vote_many(offsets, feat, thr, left, right, vote, X):
        out = np.empty(X.shape[0])
        for i in range(X.shape[0]):
            out[i] = _vote_one(offsets, feat, thr, left, right, vote, X[i])
        return out
else:
    def _vote_one(offsets, feat, thr, left, right, vote, x):
        total = 0.0
        n_trees = offsets.shape[0] - 1
        for t in range(n_trees):
            node = offsets[t]
            f = feat[node]
            while f >= 0:
                node = left[node] if x[f] <= thr[node] else right[node]
                f = feat[node]
            total += vote[node]
        return total / n_trees

    def _vote_many(offsets, feat, thr, left, right, vote, X):
        return np.array([_vote_one(offsets, feat, thr, left, right, vote, x)
                         for x in X])


class RandomForest:
    def __init__(self, trees: list[DecisionTree], feature_dim: int, tau: float):
        if not trees:
            raise ValueError("forest needs at least one tree")
        if not 0.0 <= tau <= 1.0:
            raise ValueError(f"tau must be in [0, 1], got {tau}")
        self.trees = list(trees)
        self.feature_dim = int(feature_dim)
        self.tau = float(tau)
        self._packed = None

    @property
    def n_trees(self) -> int:
        return len(self.trees)

    def _pack(self):
        if self._packed is None:
            offsets = np.zeros(self.n_trees + 1, dtype=np.int64)
            for i, t in enumerate(self.trees):
                offsets[i + 1] = offsets[i] + t.n_nodes
            feat = np.concatenate([t.feature for t in self.trees])
            thr = np.concatenate([t.threshold for t in self.trees])
            left = np.concatenate([t.left + off for t, off in zip(self.trees, offsets)]).astype(np.int32)
            right = np.concatenate([t.right + off for t, off in zip(self.trees, offsets)]).astype(np.int32)
            leaves = feat < 0
            red = np.concatenate([t.n_reducible for t in self.trees])
            irr = np.concatenate([t.n_irreducible for t in self.trees])
            vote = np.where(red > irr, 1.0, np.where(red < irr, 0.0, 0.5))
            vote[~leaves] = 0.0
            self._packed = (offsets, feat, thr, left, right, vote)
        return self._packed

    def predict_proba(self, x) -> float:
        """Fraction of trees whose leaf is reducible-majority (ties 0.5)."""
        x = np.ascontiguousarray(x, dtype=np.float64)
        if x.shape != (self.feature_dim,):
            raise ValueError(f"feature vector shape {x.shape} does not match "
                             f"dimension {self.feature_dim}")
        return float(_vote_one(*self._pack(), x))

    def predict_proba_batch(self, X) -> np.ndarray:
        X = np.ascontiguousarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.feature_dim:
            raise ValueError(f"feature matrix shape {X.shape} does not match "
                             f"dimension {self.feature_dim}")
        return _vote_many(*self._pack(), X)


def save_forest(forest: RandomForest, path) -> None:
    lines = [f"{FOREST_MAGIC} {forest.n_trees} {forest.feature_dim} {forest.tau:.17g}"]
    for tree in forest.trees:
        for i in range(tree.n_nodes):
            if tree.feature[i] >= 0:
                lines.append(f"N {tree.feature[i]} {tree.threshold[i]:.17g}")
            else:
                lines.append(f"L {tree.n_reducible[i]} {tree.n_irreducible[i]}")
    Path(path).write_text("\n".join(lines) + "\n")


def load_forest(path) -> RandomForest:
    lines = Path(path).read_text().splitlines()
    if not lines:
        raise ValueError("empty forest file")
    head = lines[0].split()
    if len(head) != 4 or head[0] != FOREST_MAGIC:
        raise ValueError(f"not a {FOREST_MAGIC} forest file")
    n_trees, feature_dim, tau = int(head[1]), int(head[2]), float(head[3])
    pos = 1

    def read_tree() -> DecisionTree:
        nonlocal pos
        b = _TreeBuilder()

        def rec() -> int:
            nonlocal pos
            if pos >= len(lines):
                raise ValueError("truncated forest file")
            parts = lines[pos].split()
            pos += 1
            if parts[0] == "L" and len(parts) == 3:
                return b.add(-1, 0.0, int(parts[1]), int(parts[2]))
            if parts[0] == "N" and len(parts) == 3:
                idx = b.add(int(parts[1]), float(parts[2]), 0, 0)
                b.left[idx] = rec()
                b.right[idx] = rec()
                return idx
            raise ValueError(f"bad forest node line: {lines[pos - 1]!r}")

        rec()
        return b.finish()

    trees = [read_tree() for _ in range(n_trees)]
    if pos != len(lines):
        raise ValueError("trailing lines after final tree")
    return RandomForest(trees, feature_dim, tau)


def generate_training_data(gate_set: GateSet, db: FactorDatabase,
                           rng: np.random.Generator, count: int,
                           len_range: tuple[int, int] = (3, 7)) -> list[LabeledSample]:
    """Balanced oracle-labeled blocks: reducible iff the database holds a
    strictly shorter factorization of the block's (padded) unitary."""
    if count < 1:
        raise ValueError("count must be >= 1")
    extractor = FeatureExtractor(gate_set)
    carrier_len = max(10, 2 * len_range[1])
    want = {1: count - count // 2, 0: count // 2}
    have = {0: 0, 1: 0}
    out: list[LabeledSample] = []
    cap = 100 * count
    for _ in range(cap):
        if have[0] >= want[0] and have[1] >= want[1]:
            break
        c = random_circuit(gate_set, db.qubit_count, carrier_len, rng)
        block = select_subblock(c, rng, *len_range)
        compact, mapping = compact_to_subspace(block.tokens)
        u = tokens_unitary(compact, gate_set, len(mapping))
        if len(mapping) < db.qubit_count:
            u = np.kron(u, identity(db.qubit_count - len(mapping)))
        fact = lookup(db, u)
        label = 1 if fact is not None and len(fact) < len(block) else 0
        if have[label] < want[label]:
            have[label] += 1
            out.append(LabeledSample(extractor.extract(compact), label))
    if have[0] < want[0] or have[1] < want[1]:
        raise RuntimeError(
            f"class balancing failed after {cap} attempts: "
            f"{have[1]} reducible / {have[0]} irreducible of {want[1]}/{want[0]} wanted")
    return out
