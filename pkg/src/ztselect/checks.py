"""Named verification checks run by ``ztselect verify``.

Each check returns a :class:`CheckResult`; a numerical failure inside a
check fails that check only.
"""

from __future__ import annotations

import dataclasses
import logging
import math
from dataclasses import dataclass
from typing import Callable, Dict, List, Sequence, Tuple

import numpy as np

from . import closedform, ergopt, gibbs, xferop
from .errors import NumericalError
from .ringspace import Params, Ring, Symbol, ring_of, words_of_length
from .signedlog import SignedLog, relative_gap

logger = logging.getLogger(__name__)

ORACLE_ALPHAS = (0.5, 1.0, 1.5, 3.0)
ORACLE_BETAS = (0.5, 1.0, 2.0)
ORACLE_SLOPES = (2.0, 3.0, 5.0)
RESIDUAL_BETAS = (0.0, 2.0, 10.0, 20.0, 40.0, 60.0)
IDENTITY_BETAS = (1.0, 10.0, 40.0, 60.0)
TAIL_BETAS = (2.0, 5.0, 10.0, 20.0, 40.0, 60.0)
SANDWICH_BETAS = (20.0, 40.0, 60.0)
RING_CHECK_DEPTH = 10
RING_WORD_LENGTH = 4
RING_ITERATIONS = 12

EXACT_TOL = 1e-12
ORACLE_P_TOL = 1e-8
ORACLE_VECTOR_TOL = 1e-6
RESIDUAL_TOL = 1e-8
MASS_TOL = 1e-10


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str
    value: float = math.nan


@dataclass(frozen=True)
class CheckOptions:
    alphas: Tuple[float, ...] = (0.5, 1.0, 2.0)
    gamma_slope: float = 3.0
    perturb: bool = False


def _ring_gap(a: xferop.RingVector, b: xferop.RingVector, depth: int) -> float:
    rings = [Ring.fix0(), Ring.fix1(), Ring.two_head()]
    rings += [Ring.run(s, n) for s in (0, 1) for n in range(1, depth + 1)]
    return max(
        relative_gap(a[r], b[r]) for r in rings if not (a[r].is_zero and b[r].is_zero)
    )


# ----------------------------
# Operator and closed forms
# ----------------------------


def check_beta0_ground_truth(opts: CheckOptions) -> CheckResult:
    p = Params(opts.alphas[0], opts.gamma_slope, 0.0)
    triple = closedform.eigen_triple(p)
    p_gap = abs(triple.P - closedform.LN3)
    h_gap = max(abs(v.to_float() - 1.0) for v in triple.H.values)
    nu_gap = max(
        abs(triple.nu[Ring.zero_run(n)].to_float() - (1.0 / 3.0) ** n * (2.0 / 3.0))
        for n in range(1, RING_CHECK_DEPTH + 1)
    )
    worst = max(p_gap, h_gap, nu_gap)
    return CheckResult(
        "beta0_ground_truth",
        worst <= EXACT_TOL,
        f"|P-ln3|={p_gap:.2e} |H-1|={h_gap:.2e} |nu-3^-n(2/3)|={nu_gap:.2e}",
        worst,
    )


def check_cross_oracle(opts: CheckOptions) -> CheckResult:
    worst_p = worst_h = worst_nu = 0.0
    for gamma_slope in ORACLE_SLOPES:
        for alpha in ORACLE_ALPHAS:
            for beta in ORACLE_BETAS:
                p = Params(alpha, gamma_slope, beta)
                op = xferop.build_operator(p)
                power = xferop.leading_pair_power(op)
                P = closedform.solve_pressure(p)
                x = closedform.fixed_point_ratio(P, p)
                worst_p = max(worst_p, abs(power.P / P - 1.0))
                h = closedform.closed_form_H(P, p, x, op.depth)
                nu = closedform.closed_form_nu(P, p, op.depth)
                h_op = xferop.eigenfunction_given_P(op, P)
                nu_op = xferop.eigenmeasure_given_P(op, P)
                worst_h = max(worst_h, _ring_gap(h_op, h, RING_CHECK_DEPTH))
                worst_nu = max(worst_nu, _ring_gap(nu_op, nu, RING_CHECK_DEPTH))
    passed = worst_p <= ORACLE_P_TOL and max(worst_h, worst_nu) <= ORACLE_VECTOR_TOL
    return CheckResult(
        "cross_oracle",
        passed,
        f"P {worst_p:.2e}, H {worst_h:.2e}, nu {worst_nu:.2e}",
        max(worst_p, worst_h, worst_nu),
    )


def check_residual_contract(opts: CheckOptions) -> CheckResult:
    worst = 0.0
    for alpha in opts.alphas:
        for beta in RESIDUAL_BETAS:
            p = Params(alpha, opts.gamma_slope, beta)
            triple = closedform.eigen_triple(p)
            res_h = triple.residual_H
            if opts.perturb:
                ring = Ring.zero_run(1)
                bent = triple.H.with_entry(ring, triple.H[ring] * 2.0)
                op = xferop.build_operator(p, triple.depth)
                res_h = xferop.residual(op, triple.P, bent, "right")
            worst = max(worst, res_h, triple.residual_nu)
    return CheckResult(
        "residual_contract", worst <= RESIDUAL_TOL, f"max residual {worst:.2e}", worst
    )


def check_ring_ratio_identity(opts: CheckOptions) -> CheckResult:
    worst = 0.0
    for alpha in opts.alphas:
        for beta in IDENTITY_BETAS:
            p = Params(alpha, 3.0, beta)
            P = closedform.solve_pressure(p)
            nu = closedform.closed_form_nu(P, p, xferop.default_depth(p))
            star = closedform.nu_ratio_star(P, p)
            for n in range(1, RING_CHECK_DEPTH + 1):
                direct = nu[Ring.zero_run(n)] / nu[Ring.one_run(n)]
                shifted = SignedLog.exp(beta * (1.0 - 2.0 ** -(n - 1))) * star
                worst = max(worst, relative_gap(direct, shifted))
    return CheckResult(
        "ring_ratio_identity", worst <= EXACT_TOL, f"max rel gap {worst:.2e}", worst
    )


def check_quadratic_residual(opts: CheckOptions) -> CheckResult:
    worst = 0.0
    for alpha in opts.alphas:
        for beta in IDENTITY_BETAS:
            p = Params(alpha, opts.gamma_slope, beta)
            P = closedform.solve_pressure(p)
            x = closedform.fixed_point_ratio(P, p)
            worst = max(worst, closedform.quadratic_residual(x, P, p))
    return CheckResult(
        "quadratic_residual", worst <= EXACT_TOL, f"max rel residual {worst:.2e}", worst
    )


def check_F_split_identity(opts: CheckOptions) -> CheckResult:
    worst = 0.0
    for Z in (0.1, 0.5, 1.0, 2.0):
        terms = math.ceil(45.0 / Z)
        for beta in (0.0, 1.0, 10.0, 40.0):
            split = closedform.F(Z, beta).value
            direct = closedform.F_partial(terms, Z, beta)
            worst = max(worst, relative_gap(split, direct))
    return CheckResult(
        "F_split_identity", worst <= EXACT_TOL, f"max rel gap {worst:.2e}", worst
    )


def check_tail_bound_lemma(opts: CheckOptions) -> CheckResult:
    slack = math.inf
    for alpha in opts.alphas:
        for beta in TAIL_BETAS:
            p = Params(alpha, 3.0, beta)
            P = closedform.solve_pressure(p)
            gap = abs(closedform.F_minus_inverse(P, beta).to_float())
            slack = min(slack, closedform.tail_bound(P, beta) - gap)
    return CheckResult(
        "tail_bound_lemma", slack >= 0.0, f"min slack {slack:.3g}", slack
    )


def check_correction_lemma(opts: CheckOptions) -> CheckResult:
    found: Dict[float, float] = {}
    for alpha in opts.alphas:
        beta0 = gibbs.locate_beta0(alpha, opts.gamma_slope)
        if beta0 is None:
            return CheckResult(
                "correction_lemma", False, f"no beta0 on the grid for alpha={alpha:g}"
            )
        found[alpha] = beta0
    detail = ", ".join(f"beta0({a:g})={b:g}" for a, b in found.items())
    return CheckResult("correction_lemma", True, detail, max(found.values()))


# ----------------------------
# Ergodic optimization
# ----------------------------


def check_calibration(opts: CheckOptions) -> CheckResult:
    worst = 0.0
    for alpha in opts.alphas:
        p = Params(alpha, 3.0, 1.0)
        solution = ergopt.solve_V(alpha)
        for s in (
            ergopt.u0_subaction(p),
            ergopt.u1_subaction(p),
            ergopt.subaction_from_solution(solution),
        ):
            worst = max(worst, ergopt.verify_calibration(s, p))
    return CheckResult(
        "calibration", worst <= EXACT_TOL, f"max violation {worst:.2e}", worst
    )


FIXED_POINTS = ((Ring.fix0(), Symbol.ZERO), (Ring.fix1(), Symbol.ONE))


def check_peierls_negative(opts: CheckOptions) -> CheckResult:
    p = Params(opts.alphas[0], opts.gamma_slope, 0.0)
    largest = -math.inf
    for length in range(1, 7):
        for w in words_of_length(length):
            for fixed, symbol in FIXED_POINTS:
                if all(s == symbol for s in w):
                    continue
                largest = max(largest, ergopt.peierls_from_fixed(fixed, w, p))
    return CheckResult(
        "peierls_negative",
        largest < 0.0,
        f"largest off the fixed points {largest:g}",
        largest,
    )


def check_maximizing_value(opts: CheckOptions) -> CheckResult:
    worst = -math.inf
    for alpha in opts.alphas:
        cert = ergopt.maximizing_value(Params(alpha, opts.gamma_slope, 0.0))
        worst = max(worst, cert.max_off_fixed)
    return CheckResult(
        "maximizing_value",
        worst < 0.0,
        f"m(A)=0, max A off fixed points {worst:g}",
        worst,
    )


# ----------------------------
# Gibbs measure
# ----------------------------


def check_sandwich(opts: CheckOptions) -> CheckResult:
    applicable = 0
    worst = math.inf
    for alpha in opts.alphas:
        for beta in SANDWICH_BETAS:
            report = gibbs.sandwich_check(Params(alpha, opts.gamma_slope, beta), beta)
            if not report.applicable:
                continue
            applicable += 1
            worst = min(worst, report.lower_margin, report.upper_margin)
    passed = applicable > 0 and worst >= 0.0
    return CheckResult(
        "sandwich",
        passed,
        f"{applicable} applicable points, min margin {worst:.3g}",
        worst,
    )


def check_mass_partition(opts: CheckOptions) -> CheckResult:
    worst = 0.0
    negative = False
    for alpha in opts.alphas:
        for beta in RESIDUAL_BETAS:
            g = gibbs.gibbs_masses(Params(alpha, opts.gamma_slope, beta))
            worst = max(
                worst,
                abs(g.total().to_float() - 1.0),
                abs(g.nu.total().to_float() - 1.0),
            )
            negative = negative or any(v.sign < 0 for v in g.masses.values)
    return CheckResult(
        "mass_partition",
        worst <= MASS_TOL and not negative,
        f"max |mass-1| {worst:.2e}",
        worst,
    )


def _shift_defect(p: Params, max_length: int, perturb: bool) -> float:
    g = gibbs.gibbs_masses(p)
    if perturb:
        ring = Ring.zero_run(2)
        g = dataclasses.replace(g, H=g.H.with_entry(ring, g.H[ring] * 1.001))
    return gibbs.shift_invariance_defect(g, max_length)


def check_shift_invariance(opts: CheckOptions) -> CheckResult:
    """Relative defect of μ([w]) = Σ_a μ([a w]) at every α of the grid."""
    low = high = 0.0
    for alpha in opts.alphas:
        p = Params(alpha, opts.gamma_slope, 2.0)
        low = max(low, _shift_defect(p, 6, opts.perturb))
        high = max(high, _shift_defect(p.at_beta(60.0), 4, opts.perturb))
    return CheckResult(
        "shift_invariance",
        low <= 1e-8 and high <= 1e-6,
        f"beta=2: {low:.2e}, beta=60: {high:.2e}",
        max(low, high),
    )


def ring_iterates(
    p: Params, max_length: int, k_max: int
) -> Dict[Ring, List[List[SignedLog]]]:
    """(L^k 1)(w) for k = 0..k_max on every word of length ≤ max_length
    that determines its ring, grouped by that ring."""
    groups: Dict[Ring, List[List[SignedLog]]] = {}
    for length in range(1, max_length + 1):
        for w in words_of_length(length):
            match = ring_of(w)
            if match.unresolved:
                continue
            series = xferop.iterate_on_word_series(w, k_max, p)
            groups.setdefault(match.ring, []).append(series)
    return groups


def ring_spread(series: List[List[SignedLog]]) -> float:
    """Largest relative gap between words of one ring at any k."""
    return max(
        relative_gap(reference, other[k])
        for other in series
        for k, reference in enumerate(series[0])
    )


def check_ring_constancy(opts: CheckOptions) -> CheckResult:
    """L^k 1 by preimage enumeration is constant on every ring for k ≤ 12
    and matches the ring-basis operator there."""
    p = Params(opts.alphas[0], opts.gamma_slope, 1.0)
    groups = ring_iterates(p, RING_WORD_LENGTH, RING_ITERATIONS)
    spread = max(ring_spread(series) for series in groups.values())

    op = xferop.build_operator(p, RING_ITERATIONS + RING_WORD_LENGTH + 8)
    matrix = op.to_matrix()
    index = {r: i for i, r in enumerate(op.states)}
    vec = np.ones(len(op.states))
    worst = 0.0
    for k in range(1, RING_ITERATIONS + 1):
        vec = matrix @ vec
        for ring, series in groups.items():
            worst = max(worst, relative_gap(series[0][k], vec[index[ring]]))
    return CheckResult(
        "ring_constancy",
        spread == 0.0 and worst <= 1e-12,
        f"{len(groups)} rings, spread {spread:.2e}, "
        f"max rel gap to operator {worst:.2e}",
        max(spread, worst),
    )


def check_nu_concentration(opts: CheckOptions) -> CheckResult:
    """ν[0] grows towards 1 along β when α < 1."""
    values = [
        gibbs.selection_record(Params(0.5, 3.0, beta)).nu0
        for beta in (10.0, 20.0, 40.0)
    ]
    increasing = all(b > a for a, b in zip(values, values[1:]))
    return CheckResult(
        "nu_concentration",
        increasing,
        "nu[0] = " + ", ".join(f"{v:.6g}" for v in values),
        values[-1],
    )


def check_regime_separation(opts: CheckOptions) -> CheckResult:
    ratios = [
        gibbs.selection_record(Params(a, 3.0, 60.0)).mu_ratio for a in (0.5, 1.0, 2.0)
    ]
    return CheckResult(
        "regime_separation",
        ratios[0] > ratios[1] > ratios[2],
        "mu ratio at beta=60: " + ", ".join(f"{r:.6g}" for r in ratios),
    )


CHECKS: List[Tuple[str, Callable[[CheckOptions], CheckResult]]] = [
    ("beta0_ground_truth", check_beta0_ground_truth),
    ("cross_oracle", check_cross_oracle),
    ("residual_contract", check_residual_contract),
    ("ring_ratio_identity", check_ring_ratio_identity),
    ("quadratic_residual", check_quadratic_residual),
    ("F_split_identity", check_F_split_identity),
    ("tail_bound_lemma", check_tail_bound_lemma),
    ("correction_lemma", check_correction_lemma),
    ("calibration", check_calibration),
    ("peierls_negative", check_peierls_negative),
    ("maximizing_value", check_maximizing_value),
    ("sandwich", check_sandwich),
    ("mass_partition", check_mass_partition),
    ("shift_invariance", check_shift_invariance),
    ("ring_constancy", check_ring_constancy),
    ("nu_concentration", check_nu_concentration),
    ("regime_separation", check_regime_separation),
]


def run_checks(
    opts: CheckOptions = CheckOptions(), only: Sequence[str] = ()
) -> List[CheckResult]:
    results = []
    for name, check in CHECKS:
        if only and name not in only:
            continue
        try:
            result = check(opts)
        except NumericalError as exc:
            result = CheckResult(name, False, f"{type(exc).__name__}: {exc}")
        status = "pass" if result.passed else "FAIL"
        logger.info("check %s: %s (%s)", name, status, result.detail)
        results.append(result)
    return results
