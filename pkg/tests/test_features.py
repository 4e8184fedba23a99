import numpy as np
import pytest

from qcreduce.circuit import Token
from qcreduce.features import FeatureExtractor
from qcreduce.gates import PRESETS

CLIFF = PRESETS["clifford_t"]()
IONTRAP = PRESETS["iontrap"]()


def tok(name, *qubits):
    return Token(name, tuple(qubits))


def test_dimension():
    assert FeatureExtractor(CLIFF).dim == 7 + 6
    assert FeatureExtractor(IONTRAP).dim == 16 + 6


def test_hand_computed_block():
    ex = FeatureExtractor(CLIFF)
    block = [tok("h", 0), tok("h", 0), tok("cx", 0, 1), tok("t", 1)]
    got = ex.extract(block)
    # length, counts (h s sdg t tdg x cx), distinct qubits,
    # equal pairs, inverse pairs, commuting pairs, max support run
    expect = [4, 2, 0, 0, 1, 0, 0, 1, 2, 1, 1, 1, 2]
    assert got.tolist() == expect


def test_inverse_pair_detection():
    ex = FeatureExtractor(CLIFF)

    def inverse_count(block):
        return ex.extract(block)[1 + 7 + 1 + 1]

    assert inverse_count([tok("s", 0), tok("sdg", 0)]) == 1
    assert inverse_count([tok("t", 0), tok("tdg", 0)]) == 1
    assert inverse_count([tok("cx", 0, 1), tok("cx", 0, 1)]) == 1
    assert inverse_count([tok("cx", 0, 1), tok("cx", 1, 0)]) == 0
    assert inverse_count([tok("x", 0), tok("x", 1)]) == 0
    assert inverse_count([tok("s", 0), tok("s", 0)]) == 0


def test_commuting_pair_detection():
    ex = FeatureExtractor(CLIFF)

    def commuting_count(block):
        return ex.extract(block)[1 + 7 + 1 + 2]

    assert commuting_count([tok("x", 0), tok("x", 1)]) == 1  # disjoint
    assert commuting_count([tok("t", 0), tok("s", 0)]) == 1  # both diagonal
    assert commuting_count([tok("h", 0), tok("t", 0)]) == 0
    assert commuting_count([tok("cx", 0, 1), tok("s", 0)]) == 1
    assert commuting_count([tok("cx", 0, 1), tok("x", 0)]) == 0


def test_flags_invariant_under_relabeling():
    ex = FeatureExtractor(CLIFF)
    a = ex.extract([tok("s", 0), tok("sdg", 0), tok("cx", 0, 1)])
    b = ex.extract([tok("s", 5), tok("sdg", 5), tok("cx", 5, 2)])
    assert a.tolist() == b.tolist()


def test_max_support_run_ignores_qubit_order():
    ex = FeatureExtractor(CLIFF)
    block = [tok("cx", 0, 1), tok("cx", 1, 0), tok("cx", 0, 1), tok("h", 0)]
    assert ex.extract(block)[-1] == 3


def test_empty_block_is_all_zero():
    ex = FeatureExtractor(CLIFF)
    assert ex.extract([]).tolist() == [0.0] * ex.dim


def test_unknown_token_rejected():
    ex = FeatureExtractor(CLIFF)
    with pytest.raises(ValueError, match="not in the gate set"):
        ex.extract([tok("rx_p2", 0)])


def test_extraction_deterministic_and_nonnegative():
    rng = np.random.default_rng(3)
    from qcreduce.circuit import random_circuit
    ex = FeatureExtractor(IONTRAP)
    for _ in range(20):
        c = random_circuit(IONTRAP, 3, int(rng.integers(1, 12)), rng)
        v1 = ex.extract(c.tokens)
        v2 = ex.extract(c.tokens)
        assert np.array_equal(v1, v2)
        assert (v1 >= 0).all()
        assert v1[0] == len(c)
