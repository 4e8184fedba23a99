"""Cheap structural features of a token block for the reducibility gate.

Extraction must stay far cheaper than composing the block's unitary, so
everything here is counting plus memoized pair algebra: the inverse/commute
flag of an adjacent pair depends only on the two defs and the relabeled
overlap pattern of their qubits, never on absolute indices.
"""
from __future__ import annotations

import numpy as np

from .circuit import COMMUTE_ATOL, Token, compact_to_subspace, token_matrix
from .gates import GateSet
from .unitary import identity, phase_distance

INVERSE_ATOL = 1e-9


class FeatureExtractor:
    """Fixed-order numeric summary of a token block.

    Layout: [block length,
             one count per TokenDef in gate-set order,
             distinct qubits touched,
             adjacent equal-token pairs,
             adjacent mutually-inverse pairs,
             adjacent commuting pairs,
             longest run of identical qubit support].
    """

    def __init__(self, gate_set: GateSet):
        self.gate_set = gate_set
        self._def_index = {d.name: i for i, d in enumerate(gate_set.defs)}
        self._pair_flags: dict[tuple, tuple[bool, bool]] = {}
        # token-pair level cache in front of the pattern-level one: the
        # distinct adjacent pairs seen on a register are few, so extract()
        # almost never pays the pattern relabeling after warmup
        self._token_pair_flags: dict[tuple[Token, Token], tuple[bool, bool]] = {}
        # per-token (def index, qubit bitmask, support key) for the same reason
        self._token_info: dict[Token, tuple[int, int, tuple]] = {}

    @property
    def dim(self) -> int:
        return len(self.gate_set.defs) + 6

    def _flags(self, a: Token, b: Token) -> tuple[bool, bool]:
        """(is inverse pair, commutes) for adjacent tokens a then b."""
        flags = self._token_pair_flags.get((a, b))
        if flags is not None:
            return flags
        # overlap pattern: for each qubit of b, its position in a's qubits,
        # or a distinct negative code per fresh qubit (fresh ones are
        # interchangeable: relabeling conjugation preserves both flags)
        fresh = -1
        rel = []
        for q in b.qubits:
            if q in a.qubits:
                rel.append(a.qubits.index(q))
            else:
                rel.append(fresh)
                fresh -= 1
        key = (a.name, b.name, len(a.qubits), tuple(rel))
        flags = self._pair_flags.get(key)
        if flags is None:
            (ca, cb), mapping = compact_to_subspace([a, b])
            k = len(mapping)
            ma = token_matrix(self.gate_set.by_name[a.name], ca.qubits, k)
            mb = token_matrix(self.gate_set.by_name[b.name], cb.qubits, k)
            inverse = phase_distance(mb @ ma, identity(k)) <= INVERSE_ATOL
            if set(ca.qubits) & set(cb.qubits):
                commuting = bool(np.linalg.norm(ma @ mb - mb @ ma) <= COMMUTE_ATOL)
            else:
                commuting = True
            flags = (inverse, commuting)
            self._pair_flags[key] = flags
        self._token_pair_flags[(a, b)] = flags
        return flags

    def _info(self, t: Token) -> tuple[int, int, tuple]:
        idx = self._def_index.get(t.name)
        if idx is None:
            raise ValueError(f"token {t.name!r} is not in the gate set")
        mask = 0
        for q in t.qubits:
            mask |= 1 << q
        sup = t.qubits if len(t.qubits) == 1 else tuple(sorted(t.qubits))
        info = (idx, mask, sup)
        self._token_info[t] = info
        return info

    def extract(self, tokens) -> np.ndarray:
        tokens = list(tokens)
        token_info = self._token_info
        pair_flags = self._token_pair_flags
        buf = [0.0] * self.dim
        buf[0] = float(len(tokens))
        tail = 1 + len(self._def_index)
        qubit_mask = 0
        equal = inverse = commuting = 0
        best = run = 0
        prev_tok = None
        prev_sup = None
        for t in tokens:
            info = token_info.get(t)
            if info is None:
                info = self._info(t)
            idx, mask, sup = info
            buf[1 + idx] += 1.0
            qubit_mask |= mask
            run = run + 1 if sup == prev_sup else 1
            prev_sup = sup
            if run > best:
                best = run
            if prev_tok is not None:
                if prev_tok == t:
                    equal += 1
                fl = pair_flags.get((prev_tok, t))
                if fl is None:
                    fl = self._flags(prev_tok, t)
                inverse += fl[0]
                commuting += fl[1]
            prev_tok = t
        buf[tail] = float(qubit_mask.bit_count())
        buf[tail + 1] = float(equal)
        buf[tail + 2] = float(inverse)
        buf[tail + 3] = float(commuting)
        buf[tail + 4] = float(best)
        return np.array(buf, dtype=np.float64)


def shared_extractor(gate_set: GateSet) -> FeatureExtractor:
    """Per-gate-set extractor reused across calls so the pair-flag caches
    stay warm from one reduction to the next."""
    ex = gate_set.__dict__.get("_feature_extractor")
    if ex is None:
        ex = FeatureExtractor(gate_set)
        gate_set.__dict__["_feature_extractor"] = ex
    return ex
