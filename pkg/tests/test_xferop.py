import math
import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), "..")))

from src.ztselect.closedform import solve_pressure
from src.ztselect.errors import (
    ConvergenceError,
    InvalidParamsError,
    SingularSystemError,
)
from src.ztselect.ringspace import Params, Ring, Word
from src.ztselect.signedlog import SignedLog
from src.ztselect.xferop import (
    RingVector,
    build_operator,
    default_depth,
    eigenfunction_given_P,
    eigenmeasure_given_P,
    iterate_on_word,
    iterate_on_word_series,
    leading_pair_power,
    residual,
    ring_basis,
    truncation_bound,
)

LN3 = math.log(3.0)


@pytest.fixture
def infinite_temperature():
    return build_operator(Params(1.0, 3.0, 0.0), depth=12)


# ----------------------------
# Basis and vectors
# ----------------------------
def test_ring_basis_order():
    basis = ring_basis(3)
    assert len(basis) == 2 * (3 + 2) + 1
    assert basis[0] == Ring.fix0()
    assert basis[4] == Ring.tail0(3)
    assert basis[-1] == Ring.two_head()
    with pytest.raises(InvalidParamsError):
        ring_basis(2)


@pytest.mark.parametrize(
    "beta,expected",
    [(0.0, 48), (0.3, 48), (2.0**20, 62)],
    ids=["zero", "small", "large"],
)
def test_default_depth(beta, expected):
    assert default_depth(Params(1.0, 3.0, beta)) == expected


def test_truncation_bound_is_tiny_at_default_depth():
    p = Params(1.0, 3.0, 60.0)
    assert 0.0 < truncation_bound(p, default_depth(p)) < 1e-10


def test_ring_vector_mapping_and_normalisation():
    depth = 3
    values = {r: SignedLog.from_float(2.0) for r in ring_basis(depth)}
    vec = RingVector.from_mapping(depth, values)
    assert vec.total().to_float() == pytest.approx(2.0 * len(ring_basis(depth)))
    assert vec.normalized_mass().total().to_float() == pytest.approx(1.0)
    assert vec.normalized_at(Ring.fix1())[Ring.fix0()].to_float() == pytest.approx(1.0)
    assert vec.all_positive

    del values[Ring.two_head()]
    with pytest.raises(InvalidParamsError):
        RingVector.from_mapping(depth, values)


def test_ring_vector_rejects_wrong_length():
    with pytest.raises(InvalidParamsError):
        RingVector(3, (SignedLog.one(),))


# ----------------------------
# Operator
# ----------------------------
def test_operator_weights():
    p = Params(2.0, 3.0, 4.0)
    op = build_operator(p, depth=6)
    assert op.weight(Ring.zero_run(1), Ring.zero_run(2)).log() == pytest.approx(-1.0)
    assert op.weight(Ring.zero_run(1), Ring.one_run(1)).log() == pytest.approx(-6.0)
    assert op.weight(Ring.zero_run(1), Ring.two_head()).log() == pytest.approx(-8.0)
    tail = op.weight(Ring.zero_run(6), Ring.tail0(6))
    assert tail.log() == pytest.approx(-4.0 / 2**7)
    with pytest.raises(KeyError):
        op.weight(Ring.zero_run(1), Ring.zero_run(3))


def test_operator_rows_sum_to_three_at_infinite_temperature(infinite_temperature):
    matrix = infinite_temperature.to_matrix()
    np.testing.assert_allclose(matrix.sum(axis=1), 3.0)


def test_uniform_vector_is_exact_eigenvector_at_beta_zero(infinite_temperature):
    ones = RingVector.from_floats(12, np.ones(len(infinite_temperature.states)))
    assert residual(infinite_temperature, LN3, ones, "right") <= 1e-15


def test_residual_rejects_unknown_side(infinite_temperature):
    ones = RingVector.from_floats(12, np.ones(len(infinite_temperature.states)))
    with pytest.raises(ValueError):
        residual(infinite_temperature, LN3, ones, "middle")


# ----------------------------
# Power iteration
# ----------------------------
def test_power_iteration_beta_zero(infinite_temperature):
    pair = leading_pair_power(infinite_temperature)
    assert pair.P == pytest.approx(LN3, abs=1e-12)
    np.testing.assert_allclose(pair.H.to_floats(), 1.0, rtol=1e-12)


@pytest.mark.parametrize("alpha", [0.5, 1.0, 3.0], ids=["a0.5", "a1", "a3"])
def test_power_iteration_matches_secular_pressure(alpha):
    p = Params(alpha, 3.0, 1.0)
    pair = leading_pair_power(build_operator(p))
    assert pair.P == pytest.approx(solve_pressure(p), rel=1e-8)


def test_power_iteration_refuses_large_beta():
    with pytest.raises(ConvergenceError):
        leading_pair_power(build_operator(Params(1.0, 3.0, 10.0), depth=8))


# ----------------------------
# Back-substitution solves
# ----------------------------
def test_eigenfunction_given_P_beta_zero(infinite_temperature):
    h = eigenfunction_given_P(infinite_temperature, LN3, check_tol=1e-12)
    np.testing.assert_allclose(h.to_floats(), 1.0, rtol=1e-12)


def test_eigenfunction_given_wrong_P_is_singular(infinite_temperature):
    with pytest.raises(SingularSystemError) as exc:
        eigenfunction_given_P(infinite_temperature, 1.0, check_tol=1e-8)
    assert exc.value.residual > 1e-8


def test_eigenfunction_given_P_rejects_out_of_range(infinite_temperature):
    with pytest.raises(InvalidParamsError):
        eigenfunction_given_P(infinite_temperature, 0.0)
    with pytest.raises(InvalidParamsError):
        eigenmeasure_given_P(infinite_temperature, 2.0)


def test_eigenmeasure_beta_zero(infinite_temperature):
    nu = eigenmeasure_given_P(infinite_temperature, LN3)
    for n in range(1, 11):
        assert nu[Ring.zero_run(n)].to_float() == pytest.approx(
            (1.0 / 3.0) ** n * (2.0 / 3.0), abs=1e-12
        )
    assert nu[Ring.fix0()].is_zero
    assert nu.total().to_float() == pytest.approx(1.0, abs=1e-12)


def test_back_substitution_agrees_with_power_iteration():
    p = Params(1.5, 3.0, 2.0)
    op = build_operator(p)
    pair = leading_pair_power(op)
    h = eigenfunction_given_P(op, pair.P)
    for n in range(1, 11):
        ring = Ring.one_run(n)
        assert h[ring].to_float() == pytest.approx(pair.H[ring].to_float(), rel=1e-6)
    assert residual(op, pair.P, eigenmeasure_given_P(op, pair.P), "left") <= 1e-8


# ----------------------------
# Direct iteration on words
# ----------------------------
def test_iterate_on_word_counts_preimages():
    p = Params(1.0, 3.0, 0.0)
    assert iterate_on_word(Word.parse("01"), 3, p).to_float() == pytest.approx(27.0)


def test_iterate_on_word_agrees_with_matrix_power():
    p = Params(0.5, 3.0, 1.0)
    op = build_operator(p, depth=12)
    vec = np.ones(len(op.states))
    for _ in range(4):
        vec = op.to_matrix() @ vec
    index = op.states.index(Ring.zero_run(1))
    direct = iterate_on_word(Word.parse("01"), 4, p).to_float()
    assert direct == pytest.approx(vec[index], rel=1e-12)


def test_iterate_on_word_series():
    p = Params(0.7, 3.0, 1.0)
    series = iterate_on_word_series(Word.parse("2"), 3, p)
    assert len(series) == 4
    assert series[0].to_float() == 1.0
    other = iterate_on_word(Word.parse("21"), 3, p)
    assert series[3].to_float() == other.to_float()
    with pytest.raises(InvalidParamsError):
        iterate_on_word(Word.parse("00"), 2, p)
