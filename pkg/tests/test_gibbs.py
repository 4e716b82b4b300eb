import dataclasses
import math
import os
import sys

import pytest

sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), "..")))

from src.ztselect.closedform import GOLDEN
from src.ztselect.errors import InvalidParamsError
from src.ztselect.gibbs import (
    Extrapolation,
    cylinder_mass,
    extrapolate,
    gibbs_masses,
    locate_beta0,
    mu_cylinder_masses,
    ring_selection_rates,
    sandwich_check,
    selection_ratio,
    selection_record,
    selection_report,
    shift_invariance_defect,
    target_met,
)
from src.ztselect.ringspace import Params, Ring
from src.ztselect.signedlog import relative_gap


def _ratio(alpha, beta, gamma_slope=3.0):
    return selection_ratio(gibbs_masses(Params(alpha, gamma_slope, beta))).to_float()


# ----------------------------
# Masses
# ----------------------------
@pytest.mark.parametrize("alpha", [0.5, 1.0, 2.0], ids=["a0.5", "a1", "a2"])
@pytest.mark.parametrize("beta", [0.0, 2.0, 40.0], ids=["b0", "b2", "b40"])
def test_masses_partition_unity(alpha, beta):
    g = gibbs_masses(Params(alpha, 3.0, beta))
    assert g.total().to_float() == pytest.approx(1.0, abs=1e-10)
    mu0, mu1, mu2 = (m.to_float() for m in mu_cylinder_masses(g))
    assert mu0 + mu1 + mu2 == pytest.approx(1.0, abs=1e-10)
    assert all(m.sign >= 0 for m in g.masses.values)
    zero = {ring for ring, m in g.masses.items() if m.is_zero}
    assert zero == {Ring.fix0(), Ring.fix1()}


def test_masses_at_infinite_temperature_are_uniform():
    g = gibbs_masses(Params(1.0, 3.0, 0.0))
    for m in mu_cylinder_masses(g):
        assert m.to_float() == pytest.approx(1.0 / 3.0, abs=1e-12)


def test_cylinder_masses_match_ring_sums():
    g = gibbs_masses(Params(2.0, 3.0, 5.0))
    assert relative_gap(cylinder_mass(g, "0"), g.run_mass(0)) <= 1e-12
    assert relative_gap(cylinder_mass(g, "2"), g.run_mass(2)) <= 1e-10
    assert cylinder_mass(g, "").to_float() == 1.0


@pytest.mark.parametrize("alpha", [0.5, 1.0, 2.0], ids=["a0.5", "a1", "a2"])
def test_shift_invariance(alpha):
    g = gibbs_masses(Params(alpha, 3.0, 2.0))
    assert shift_invariance_defect(g, max_length=4) <= 1e-8
    high = gibbs_masses(Params(alpha, 3.0, 60.0))
    assert shift_invariance_defect(high, max_length=3) <= 1e-6


def test_shift_invariance_detects_a_bent_eigenfunction():
    g = gibbs_masses(Params(2.0, 3.0, 2.0))
    ring = Ring.zero_run(2)
    bent = dataclasses.replace(g, H=g.H.with_entry(ring, g.H[ring] * 1.001))
    assert shift_invariance_defect(bent, max_length=3) >= 1e-4


# ----------------------------
# Selection
# ----------------------------
def test_selection_above_critical_level():
    assert _ratio(2.0, 60.0) == pytest.approx(1.0, rel=0.1)
    limit = extrapolate([_ratio(2.0, b) for b in (30.0, 45.0, 60.0)])
    assert limit.estimate == pytest.approx(1.0, rel=0.05)


def test_selection_at_critical_level():
    assert _ratio(1.0, 60.0) == pytest.approx(GOLDEN**2, rel=0.15)
    records = [selection_record(Params(1.0, 3.0, b)) for b in (30.0, 45.0, 60.0)]
    for values in (
        [r.x_ratio for r in records],
        [r.nu_star_ratio for r in records],
        [r.P_e2beta for r in records],
    ):
        assert extrapolate(values).estimate == pytest.approx(GOLDEN, rel=0.05)


def test_extrapolated_selection_at_critical_level():
    limit = extrapolate([_ratio(1.0, b) for b in (30.0, 45.0, 60.0)])
    assert abs(limit.estimate / GOLDEN**2 - 1.0) < 0.05


def test_selection_rates_below_critical_level():
    r = selection_record(Params(0.5, 3.0, 80.0))
    assert math.log(r.mu_ratio) / r.beta == pytest.approx(1.0, abs=0.05)
    assert math.log(r.nu_star_ratio) / r.beta == pytest.approx(0.5, abs=0.05)
    assert r.log_P_over_beta == pytest.approx(-1.5, abs=0.05)


@pytest.mark.parametrize(
    "gamma_slope,alpha,expected",
    [(2.0, 2.0, 1.0), (5.0, 3.0, 1.0), (5.0, 2.0, GOLDEN**2)],
    ids=["g2-above", "g5-above", "g5-level"],
)
def test_selection_other_slopes(gamma_slope, alpha, expected):
    assert _ratio(alpha, 60.0, gamma_slope) == pytest.approx(expected, rel=0.15)


def test_regime_separation():
    beta = 40.0
    assert _ratio(0.5, beta) > _ratio(1.0, beta) > _ratio(2.0, beta)


def test_ring_selection_rates():
    rates = ring_selection_rates(gibbs_masses(Params(2.0, 3.0, 40.0)), n_max=5)
    assert len(rates) == 5
    assert all(math.isfinite(r) for r in rates)
    with pytest.raises(InvalidParamsError):
        ring_selection_rates(gibbs_masses(Params(2.0, 3.0, 0.0)))


# ----------------------------
# Sandwich
# ----------------------------
def test_locate_beta0():
    beta0 = locate_beta0(2.0)
    assert beta0 is not None
    assert 1.0 <= beta0 <= 40.0
    above = min(beta0 + 10.0, 40.0)
    for beta in (beta0, above):
        report = sandwich_check(Params(2.0), beta, beta0=beta0)
        assert report.applicable
        assert report.holds


def test_sandwich_holds_past_beta0():
    report = sandwich_check(Params(2.0), 40.0)
    assert report.applicable
    assert report.holds
    assert 0.0 < report.head_weight < 1.0


def test_sandwich_not_applicable_below_beta0():
    report = sandwich_check(Params(2.0), 0.5)
    assert not report.applicable
    assert not report.holds
    assert math.isnan(report.mu_ratio)


# ----------------------------
# Extrapolation
# ----------------------------
def test_extrapolate_geometric_sequence():
    assert extrapolate([1.5, 1.25, 1.125]) == Extrapolation(1.0, 0.125, "aitken")


def test_extrapolate_short_and_constant():
    assert extrapolate([1.0, 2.0]) == Extrapolation(2.0, 1.0, "last")
    assert extrapolate([3.0, 3.0, 3.0]) == Extrapolation(3.0, 0.0, "aitken")
    assert extrapolate([1.0, 2.0, 4.0], mode="last").estimate == 4.0


@pytest.mark.parametrize(
    "values,mode",
    [([1.0, math.nan], "aitken"), ([1.0, 2.0], "median"), ([1.0], "aitken")],
    ids=["nan", "mode", "short"],
)
def test_extrapolate_rejects(values, mode):
    with pytest.raises(ValueError):
        extrapolate(values, mode)


# ----------------------------
# Sweep
# ----------------------------
def test_selection_report_grid():
    betas = (10.0, 20.0, 40.0)
    records = selection_report((0.5, 1.0, 2.0), betas, threads=2)
    assert len(records) == 9
    assert [(r.alpha, r.beta) for r in records[:3]] == [(0.5, b) for b in betas]
    for r in records:
        assert r.residual_H <= 1e-8
        assert r.residual_nu <= 1e-8
        assert r.certified
        if r.beta == 40.0:
            assert r.target_met is not None
        else:
            assert r.target_met is None
    assert records[3].targets.mu_ratio.value == pytest.approx(GOLDEN**2)


@pytest.mark.parametrize(
    "alpha,mu_ratio,expected",
    [
        (0.5, math.exp(40.0 * 1.04), True),
        (0.5, math.exp(40.0 * 1.08), False),
        (0.5, math.exp(40.0 * 0.9), False),
        (2.0, 1.05, True),
        (2.0, 1.2, False),
    ],
    ids=[
        "rate-inside",
        "rate-outside",
        "rate-below",
        "finite-inside",
        "finite-outside",
    ],
)
def test_target_met_band(alpha, mu_ratio, expected):
    record = selection_record(Params(alpha, 3.0, 40.0))
    assert target_met(dataclasses.replace(record, mu_ratio=mu_ratio)) is expected


def test_target_met_unknown_at_infinite_temperature():
    assert target_met(selection_record(Params(2.0, 3.0, 0.0))) is None


def test_selection_report_rejects_empty_grid():
    with pytest.raises(InvalidParamsError):
        selection_report((), (1.0,))


def test_record_to_dict_columns():
    data = selection_record(Params(1.0, 3.0, 10.0)).to_dict()
    assert list(data)[:3] == ["alpha", "gamma_slope", "beta"]
    assert data["certified"] is True
    assert data["target_mu_ratio"] == pytest.approx(GOLDEN**2)
