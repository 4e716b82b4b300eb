import math
import os
import sys

import pytest

sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), "..")))

from src.ztselect.closedform import (
    GOLDEN,
    LN3,
    MAX_BETA,
    F,
    F_difference,
    F_minus_inverse,
    F_partial,
    H_ring_values,
    H_ring_values_stable,
    H_star_values,
    closed_form_H,
    closed_form_nu,
    critical_alpha,
    eigen_triple,
    fixed_point_ratio,
    limit_targets,
    nu_ratio_cyl,
    nu_ratio_star,
    nu_ring_ratio,
    quadratic_residual,
    secular_residual,
    solve_pressure,
    tail_bound,
)
from src.ztselect.errors import InvalidParamsError
from src.ztselect.ringspace import Params, Ring
from src.ztselect.signedlog import SignedLog, relative_gap, signed_sum
from src.ztselect.xferop import (
    build_operator,
    eigenfunction_given_P,
    eigenmeasure_given_P,
)


# ----------------------------
# F series
# ----------------------------
def test_F_at_beta_zero_is_geometric():
    for Z in (0.1, 1.0, 3.0):
        geometric = 1.0 / (1.0 - math.exp(-Z))
        assert F(Z, 0.0).value.to_float() == pytest.approx(geometric, rel=1e-15)
        assert F(Z, 0.0).correction.is_zero


@pytest.mark.parametrize("Z", [0.1, 0.5, 2.0], ids=["z0.1", "z0.5", "z2"])
@pytest.mark.parametrize("beta", [1.0, 10.0, 40.0], ids=["b1", "b10", "b40"])
def test_F_split_matches_direct_sum(Z, beta):
    direct = F_partial(math.ceil(45.0 / Z), Z, beta)
    assert relative_gap(F(Z, beta).value, direct) <= 1e-12


@pytest.mark.parametrize("Z", [0.05, 0.5, 2.0], ids=["z0.05", "z0.5", "z2"])
@pytest.mark.parametrize("beta", [5.0, 40.0], ids=["b5", "b40"])
def test_F_truncation_error_bounds_dropped_tail(Z, beta):
    truncated = F(Z, beta, eps=1e-6)
    direct = F_partial(math.ceil(60.0 / Z), Z, beta)
    assert truncated.truncation_error <= 1e-6
    assert relative_gap(truncated.value, direct) <= truncated.truncation_error + 1e-14


def test_F_rejects_bad_arguments():
    with pytest.raises(InvalidParamsError):
        F(0.0, 1.0)
    with pytest.raises(InvalidParamsError):
        F(1.0, -1.0)


def test_F_partial_edges():
    assert F_partial(-1, 1.0, 5.0).is_zero
    assert F_partial(0, 1.0, 5.0).log() == pytest.approx(2.5)
    with pytest.raises(InvalidParamsError):
        F_partial(-2, 1.0, 5.0)


def test_F_difference():
    assert F_difference(0.3, 4.0, 4.0).is_zero
    diff = F_difference(0.3, 6.0, 2.0).to_float()
    expected = F(0.3, 6.0).value.to_float() - F(0.3, 2.0).value.to_float()
    assert diff == pytest.approx(expected, rel=1e-12)


def test_F_minus_inverse_small_Z():
    assert F_minus_inverse(1e-6, 0.0).to_float() == pytest.approx(0.5, abs=1e-6)
    Z = 0.5
    expected = F(Z, 3.0).value.to_float() - 1.0 / Z
    assert F_minus_inverse(Z, 3.0).to_float() == pytest.approx(expected, rel=1e-12)


def test_tail_bound():
    assert tail_bound(0.7, 10.0) == math.inf
    assert 0.0 < tail_bound(1e-5, 10.0) < math.inf


# ----------------------------
# Pressure
# ----------------------------
@pytest.mark.parametrize("alpha", [0.5, 1.0, 3.0])
@pytest.mark.parametrize("gamma_slope", [2.0, 3.0, 5.0])
def test_pressure_at_beta_zero(alpha, gamma_slope):
    P = solve_pressure(Params(alpha, gamma_slope, 0.0))
    assert P == pytest.approx(LN3, abs=1e-12)


def test_pressure_decreases_with_beta():
    values = [solve_pressure(Params(1.0, 3.0, b)) for b in (0.0, 1.0, 5.0, 20.0, 60.0)]
    assert all(b < a for a, b in zip(values, values[1:]))
    assert all(v > 0 for v in values)


def test_secular_residual_brackets_root():
    p = Params(1.0, 3.0, 10.0)
    P = solve_pressure(p)
    assert secular_residual(0.5 * P, p).sign > 0
    assert secular_residual(2.0 * P, p).sign < 0


def test_pressure_tolerance_validation():
    with pytest.raises(InvalidParamsError):
        solve_pressure(Params(1.0, 3.0, 1.0), tol=0.0)


def test_refined_pressure_alpha_above_one():
    P = solve_pressure(Params(2.0, 3.0, 40.0))
    assert 0.9 <= P * math.exp(80.0) <= 1.1


@pytest.mark.parametrize(
    "alpha,gamma_slope,beta",
    [
        (2.0, 3.0, 40.0),
        (2.0, 3.0, 60.0),
        (3.0, 3.0, 16.0),
        (3.0, 3.0, 100.0),
        (1.5, 3.0, 63.0),
        (2.0, 2.0, 21.0),
        (3.0, 5.0, 42.0),
    ],
    ids=["a2-b40", "a2-b60", "a3-b16", "a3-b100", "a1.5-b63", "g2-b21", "g5-b42"],
)
def test_pressure_above_critical_level_at_large_beta(alpha, gamma_slope, beta):
    p = Params(alpha, gamma_slope, beta)
    P = solve_pressure(p)
    assert 0.0 < P < LN3
    assert secular_residual(0.5 * P, p).sign > 0
    assert secular_residual(2.0 * P, p).sign < 0


def test_pressure_near_the_beta_ceiling():
    P = solve_pressure(Params(2.0, 3.0, 250.0))
    assert math.log(P) / 250.0 == pytest.approx(-2.0, abs=0.01)
    with pytest.raises(InvalidParamsError):
        solve_pressure(Params(2.0, 3.0, MAX_BETA + 1.0))


@pytest.mark.parametrize(
    "alpha,target", [(0.5, -1.5), (0.9, -1.9), (1.0, -2.0), (1.5, -2.0), (3.0, -2.0)]
)
def test_pressure_decay_rate(alpha, target):
    beta = 80.0
    assert math.log(solve_pressure(Params(alpha, 3.0, beta))) / beta == pytest.approx(
        target, abs=0.05
    )


# ----------------------------
# ν ratios
# ----------------------------
@pytest.mark.parametrize("beta", [2.0, 20.0], ids=["b2", "b20"])
def test_nu_cylinder_ratio_matches_ring_sums(beta):
    p = Params(0.5, 3.0, beta)
    P = solve_pressure(p)
    nu = closed_form_nu(P, p, 48)
    runs = range(1, 49)
    zeros = signed_sum([nu[Ring.zero_run(n)] for n in runs] + [nu[Ring.tail0(48)]])
    ones = signed_sum([nu[Ring.one_run(n)] for n in runs] + [nu[Ring.tail1(48)]])
    assert relative_gap(zeros / ones, nu_ratio_cyl(P, p)) <= 1e-10


def test_ring_ratio_identity():
    p = Params(1.0, 3.0, 30.0)
    P = solve_pressure(p)
    nu = closed_form_nu(P, p, 48)
    star = nu_ratio_star(P, p)
    for n in range(1, 11):
        direct = nu[Ring.zero_run(n)] / nu[Ring.one_run(n)]
        shifted = SignedLog.exp(30.0 * (1.0 - 2.0 ** -(n - 1))) * star
        assert relative_gap(direct, shifted) <= 1e-12
        assert relative_gap(nu_ring_ratio(n, P, p), shifted) <= 1e-12


def test_nu_ratio_rejects_nonpositive_pressure():
    with pytest.raises(InvalidParamsError):
        nu_ratio_star(0.0, Params(1.0))
    with pytest.raises(InvalidParamsError):
        nu_ring_ratio(0, 0.5, Params(1.0))


# ----------------------------
# Fixed-point ratio and H
# ----------------------------
def test_fixed_point_ratio_beta_zero():
    p = Params(1.0, 3.0, 0.0)
    assert fixed_point_ratio(LN3, p).to_float() == pytest.approx(1.0, rel=1e-14)


@pytest.mark.parametrize("alpha", [0.5, 1.0, 2.0])
@pytest.mark.parametrize("beta", [0.0, 10.0, 40.0])
def test_quadratic_residual(alpha, beta):
    p = Params(alpha, 3.0, beta)
    P = solve_pressure(p)
    assert quadratic_residual(fixed_point_ratio(P, p), P, p) <= 1e-12


@pytest.mark.parametrize("alpha", [1.0, 2.0], ids=["a1", "a2"])
def test_displayed_and_stable_H_agree(alpha):
    p = Params(alpha, 3.0, 10.0)
    P = solve_pressure(p)
    x = fixed_point_ratio(P, p)
    star0, star1 = H_star_values(P, p, x)
    h0, h1 = H_ring_values_stable(1, P, p, x)
    assert relative_gap(star0, h0) <= 1e-8
    assert relative_gap(star1, h1) <= 1e-8
    for n in range(1, 7):
        shown = H_ring_values(n, P, p, x)
        stable = H_ring_values_stable(n, P, p, x)
        assert relative_gap(shown[0], stable[0]) <= 1e-8
        assert relative_gap(shown[1], stable[1]) <= 1e-8


def test_closed_forms_match_operator_solves():
    p = Params(1.0, 3.0, 2.0)
    P = solve_pressure(p)
    op = build_operator(p)
    h = closed_form_H(P, p, fixed_point_ratio(P, p), op.depth)
    nu = closed_form_nu(P, p, op.depth)
    h_op = eigenfunction_given_P(op, P)
    nu_op = eigenmeasure_given_P(op, P)
    rings = [Ring.run(s, n) for s in (0, 1) for n in range(1, 11)] + [Ring.two_head()]
    for ring in rings + [Ring.fix0()]:
        assert relative_gap(h[ring], h_op[ring]) <= 1e-6
    for ring in rings:
        assert relative_gap(nu[ring], nu_op[ring]) <= 1e-8


@pytest.mark.parametrize("alpha", [0.5, 2.0], ids=["a0.5", "a2"])
@pytest.mark.parametrize("beta", [0.0, 2.0, 20.0, 60.0])
def test_eigen_triple_residuals(alpha, beta):
    triple = eigen_triple(Params(alpha, 3.0, beta))
    assert triple.residual_H <= 1e-8
    assert triple.residual_nu <= 1e-8
    assert triple.H.all_positive
    assert triple.nu.total().to_float() == pytest.approx(1.0, abs=1e-12)


def test_eigen_triple_beta_zero_ground_truth():
    triple = eigen_triple(Params(1.0, 3.0, 0.0))
    assert triple.P == pytest.approx(LN3, abs=1e-12)
    for value in triple.H.values:
        assert value.to_float() == pytest.approx(1.0, abs=1e-12)
    for n in range(1, 11):
        assert triple.nu[Ring.zero_run(n)].to_float() == pytest.approx(
            (1.0 / 3.0) ** n * (2.0 / 3.0), abs=1e-12
        )


# ----------------------------
# Targets
# ----------------------------
def test_limit_targets_three_regimes():
    above = limit_targets(2.0)
    assert above.mu_ratio.value == 1.0
    assert above.gamma == -2.0 and above.delta_v == 1.0
    assert above.certified

    at = limit_targets(1.0)
    assert at.mu_ratio.value == pytest.approx(GOLDEN**2)
    assert at.x_ratio.value == pytest.approx(GOLDEN)
    assert at.nu_star_ratio.value == pytest.approx(GOLDEN)
    assert at.p_e2beta.value == pytest.approx(GOLDEN)

    below = limit_targets(0.5)
    assert below.mu_ratio.diverges
    assert below.mu_ratio.rate == pytest.approx(1.0)
    assert below.gamma == -1.5
    assert below.mu_ratio.as_float() == math.inf


def test_limit_targets_other_slopes_are_uncertified():
    assert critical_alpha(5.0) == 2.0
    t = limit_targets(2.0, gamma_slope=5.0)
    assert not t.certified
    assert t.mu_ratio.value == pytest.approx(GOLDEN**2)
    assert not t.x_ratio.known
    assert limit_targets(3.0, gamma_slope=5.0).mu_ratio.value == 1.0
    assert limit_targets(2.0, gamma_slope=2.0).delta_v == 0.5


def test_limit_targets_to_dict():
    data = limit_targets(0.5).to_dict()
    assert data["mu_ratio"] == {"value": "inf", "rate": 1.0}
    assert data["gamma"] == -1.5
    assert data["certified"] is True
