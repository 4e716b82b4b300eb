"""Closed forms for the pressure, the ring values of H and ν, and the
zero-temperature targets.

Central object is the series

    F(Z, γ) = Σ_{k≥0} e^{-kZ} e^{γ/2^{k+1}},

evaluated as the exact geometric part 1/(1 − e^{-Z}) plus the correction
Σ e^{-kZ} expm1(γ/2^{k+1}), which converges in a few dozen terms even when
Z is of order e^{-2β}.

Notation used below, with λ = e^P and E = e^{-αβ}:

    u = e^{-P-β} F(P, β),  v = e^{-P-Γβ} F(P, Γβ),  w = e^{-P-αβ}.

The pressure is the root of uv + w(1+u)(1+v) = 1, and ν[0] = u/(1+u),
ν[1] = v/(1+v), ν[2] = w.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Dict, List, NamedTuple, Optional, Tuple

from .errors import (
    BracketError,
    ConvergenceError,
    InvalidParamsError,
    NumericalError,
)
from .ringspace import Params, Ring
from .signedlog import LOG_ZERO, SignedLog, logsumexp
from .xferop import (
    EigenTriple,
    RingVector,
    build_operator,
    default_depth,
    residual,
)

logger = logging.getLogger(__name__)

LN2 = math.log(2.0)
LN3 = math.log(3.0)
GOLDEN = (1.0 + math.sqrt(5.0)) / 2.0

DEFAULT_TOL = 1e-13
DEFAULT_F_EPS = 1e-17
MAX_F_TERMS = 4000
# |Φ(ln 3)| below this counts as a root at the upper end (β = 0).
ROOT_SLACK = 1e-13
SMALLEST_PRESSURE = 1e-300
# P(β) decays like e^{-2β} at worst and must stay above SMALLEST_PRESSURE.
MAX_BETA = 300.0


def _log_expm1(y: float) -> float:
    """log(e^y − 1) for y > 0, without overflow."""
    if y > 30.0:
        return y + math.log1p(-math.exp(-y))
    return math.log(math.expm1(y))


def _one_minus_exp_neg(z: float) -> SignedLog:
    """1 − e^{-z} for z > 0."""
    return SignedLog.exp(math.log(-math.expm1(-z)))


# ----------------------------
# F and its partial sums
# ----------------------------


@dataclass(frozen=True)
class FValue:
    value: SignedLog
    correction: SignedLog
    truncation_error: float
    terms_used: int


def F(Z: float, beta: float, eps: float = DEFAULT_F_EPS) -> FValue:
    """F(Z, β) with the geometric part exact and the correction truncated
    once a term drops below ``eps`` times the running value.

    Each correction term is at most e^{-Z}/2 times the one before, so the
    dropped tail is at most r/(1 − r) times the last kept term with
    r = e^{-Z}/2; ``truncation_error`` reports that bound relative to the
    value.
    """
    if not Z > 0:
        raise InvalidParamsError(f"F needs Z > 0, got {Z}")
    if beta < 0:
        raise InvalidParamsError(f"F needs beta >= 0, got {beta}")

    geometric_log = -math.log(-math.expm1(-Z))
    log_eps = math.log(eps)
    term_logs: List[float] = []
    running = LOG_ZERO
    last = LOG_ZERO
    k = 0
    while True:
        y = beta / 2.0 ** (k + 1)
        if y == 0.0:
            break
        last = -k * Z + _log_expm1(y)
        term_logs.append(last)
        running = logsumexp((running, last))
        k += 1
        if last < log_eps + logsumexp((geometric_log, running)):
            break
        if k >= MAX_F_TERMS:
            raise ConvergenceError(
                f"F({Z}, {beta}) needs more than {MAX_F_TERMS} terms", k
            )

    correction_log = logsumexp(term_logs)
    total_log = logsumexp((geometric_log, correction_log))
    ratio = 0.5 * math.exp(-Z)
    tail_log = last + math.log(ratio / (1.0 - ratio))
    truncation_error = math.exp(tail_log - total_log) if term_logs else 0.0
    return FValue(
        value=SignedLog.exp(total_log),
        correction=SignedLog.exp(correction_log) if term_logs else SignedLog.zero(),
        truncation_error=truncation_error,
        terms_used=k,
    )


def F_partial(n: int, Z: float, beta: float) -> SignedLog:
    """Σ_{k=0}^{n} e^{-kZ} e^{β/2^{k+1}}, zero for n = -1."""
    if n < -1:
        raise InvalidParamsError(f"partial sums start at n = -1, got {n}")
    if n == -1:
        return SignedLog.zero()
    exponents = [-k * Z + beta / 2.0 ** (k + 1) for k in range(n + 1)]
    return SignedLog.exp(logsumexp(exponents))


def F_difference(Z: float, beta_hi: float, beta_lo: float) -> SignedLog:
    """F(Z, β_hi) − F(Z, β_lo); the geometric parts cancel exactly."""
    return F(Z, beta_hi).correction - F(Z, beta_lo).correction


def F_minus_inverse(Z: float, beta: float) -> SignedLog:
    """F(Z, β) − 1/Z, free of the cancellation between the two large terms."""
    if Z < 1e-4:
        # 1/(1 − e^{-Z}) − 1/Z = 1/2 + Z/12 − Z³/720 + ...
        head = 0.5 + Z / 12.0 - Z**3 / 720.0
    else:
        head = -1.0 / math.expm1(-Z) - 1.0 / Z
    return SignedLog.from_float(head) + F(Z, beta).correction


def tail_bound(P: float, beta: float) -> float:
    """(β e^{β/2} / (2 ln 2)) (2 + Σ_{n≥1} (P/ln 2)^n); inf when P ≥ ln 2."""
    q = P / LN2
    if q >= 1.0:
        return math.inf
    log_bound = (
        math.log(beta)
        + beta / 2.0
        - math.log(2.0 * LN2)
        + math.log(2.0 + q / (1.0 - q))
    )
    return math.exp(min(log_bound, 709.0))


# ----------------------------
# Pressure
# ----------------------------


class SecularParts(NamedTuple):
    u: SignedLog
    v: SignedLog
    w: SignedLog


def secular_parts(P: float, p: Params) -> SecularParts:
    gamma_beta = p.gamma_slope * p.beta
    u = SignedLog.exp(-P - p.beta) * F(P, p.beta).value
    v = SignedLog.exp(-P - gamma_beta) * F(P, gamma_beta).value
    w = SignedLog.exp(-P - p.alpha * p.beta)
    return SecularParts(u, v, w)


def secular_residual(P: float, p: Params) -> SignedLog:
    """Φ(P) = uv + w(1+u)(1+v) − 1.

    Strictly decreasing in P, and of the same sign as the secular function
    G wherever G's denominator 1 − uv is positive.
    """
    u, v, w = secular_parts(P, p)
    one = SignedLog.one()
    return u * v + w * (one + u) * (one + v) - one


def solve_pressure(p: Params, tol: float = DEFAULT_TOL, max_iter: int = 500) -> float:
    """Pressure P(β) as the root of the secular equation on (P_lo, ln 3].

    The bracket's lower end is pushed down geometrically, at most to
    e^{-(2+Γ)β}; the bisection runs on log P while the bracket spans more
    than a factor two, so it reaches relative accuracy ``tol`` in a few
    dozen steps however small P is.
    """
    if not tol > 0:
        raise InvalidParamsError(f"tol must be > 0, got {tol}")
    if p.beta > MAX_BETA:
        raise InvalidParamsError(
            f"beta must be <= {MAX_BETA:g} for a double-precision pressure, "
            f"got {p.beta:g}"
        )

    hi = LN3
    phi_hi = secular_residual(hi, p)
    if phi_hi.sign >= 0:
        if phi_hi.sign == 0 or phi_hi.log_mag <= math.log(ROOT_SLACK):
            return hi
        raise BracketError(
            f"secular function positive at ln 3 for {p}",
            low_value=math.nan,
            high_value=phi_hi.to_float(),
        )

    floor = max(math.exp(-(2.0 + p.gamma_slope) * p.beta), SMALLEST_PRESSURE)
    lo = 0.5 * LN3
    while True:
        phi_lo = secular_residual(lo, p)
        if phi_lo.sign > 0:
            break
        if lo <= floor:
            raise BracketError(
                f"no sign change of the secular function on [{lo:.3g}, ln 3] for {p}",
                low_value=phi_lo.to_float(),
                high_value=phi_hi.to_float(),
            )
        lo = max(lo * 1e-3, floor)

    for iteration in range(max_iter):
        if hi / lo - 1.0 <= tol:
            break
        mid = math.sqrt(lo * hi) if hi > 2.0 * lo else 0.5 * (lo + hi)
        sign = secular_residual(mid, p).sign
        if sign == 0:
            lo = hi = mid
            break
        if sign > 0:
            lo = mid
        else:
            hi = mid
    else:
        raise ConvergenceError(f"bisection did not reach tol={tol} for {p}", max_iter)

    root = 0.5 * (lo + hi)
    # 1 − uv equals w(1+u)(1+v) at the root; the direct difference is
    # below double resolution once uv = 1 − O(e^{-β}).
    u, v, w = secular_parts(root, p)
    one = SignedLog.one()
    denominator = w * (one + u) * (one + v)
    if denominator.sign <= 0 or not math.isfinite(denominator.log_mag):
        raise NumericalError(f"secular denominator nonpositive at root P={root!r}")
    logger.debug("pressure %s -> P=%.17g after %d bisection steps", p, root, iteration)
    return root


# ----------------------------
# ν ratios
# ----------------------------


def nu_ratio_cyl(P: float, p: Params) -> SignedLog:
    """ν[0]/ν[1] = e^{(Γ−1)β} F(P,β)(1+v) / (F(P,Γβ)(1+u))."""
    if not P > 0:
        raise InvalidParamsError(f"P must be > 0, got {P}")
    gamma_beta = p.gamma_slope * p.beta
    f1 = F(P, p.beta).value
    fg = F(P, gamma_beta).value
    u, v, _ = secular_parts(P, p)
    one = SignedLog.one()
    prefactor = SignedLog.exp((p.gamma_slope - 1.0) * p.beta)
    return prefactor * f1 * (one + v) / (fg * (one + u))


def nu_ratio_star(P: float, p: Params) -> SignedLog:
    """ν[0∗₀]/ν[1∗₁] = e^{(Γ−1)β/2} (1+v)/(1+u)."""
    if not P > 0:
        raise InvalidParamsError(f"P must be > 0, got {P}")
    u, v, _ = secular_parts(P, p)
    one = SignedLog.one()
    return SignedLog.exp((p.gamma_slope - 1.0) * p.beta / 2.0) * (one + v) / (one + u)


def nu_ring_ratio(n: int, P: float, p: Params) -> SignedLog:
    """ν[0ⁿ∗₀]/ν[1ⁿ∗₁] = e^{(Γ−1)β(1/2 − 1/2ⁿ)} · ν[0∗₀]/ν[1∗₁]."""
    if n < 1:
        raise InvalidParamsError(f"ring index must be >= 1, got {n}")
    exponent = (p.gamma_slope - 1.0) * p.beta * (0.5 - 2.0**-n)
    return SignedLog.exp(exponent) * nu_ratio_star(P, p)


# ----------------------------
# Fixed-point ratio and H
# ----------------------------


class QuadraticCoefficients(NamedTuple):
    a: SignedLog
    b: SignedLog
    c: SignedLog
    d: SignedLog
    b_minus_c: SignedLog


def fixed_point_coefficients(P: float, p: Params) -> QuadraticCoefficients:
    """a, b, c, d of x = (a + bx)/(dx + c); for Γ = 3, a = d = e^P."""
    beta, alpha, gamma = p.beta, p.alpha, p.gamma_slope
    lam = SignedLog.exp(P)
    damp = SignedLog.one() + SignedLog.exp(-P - alpha * beta)
    scale = SignedLog.exp(-2.0 * beta)

    b0 = F(P, beta).value * damp + SignedLog.exp((1.0 - alpha) * beta)
    b1 = F(P, gamma * beta).value * damp + SignedLog.exp((gamma - alpha) * beta)

    # B1 − B0 without forming the two large F values
    spread = F_difference(P, gamma * beta, beta) * damp
    if beta > 0:
        spread = spread + SignedLog.exp(
            -alpha * beta + beta + _log_expm1((gamma - 1.0) * beta)
        )
    return QuadraticCoefficients(
        a=lam,
        b=-(b0 * scale),
        c=-(b1 * scale),
        d=lam * SignedLog.exp((gamma - 3.0) * beta),
        b_minus_c=spread * scale,
    )


def fixed_point_ratio(P: float, p: Params) -> SignedLog:
    """x = e^β H(0^∞)/H(1^∞), the positive root of d x² + (c − b) x − a = 0."""
    a, _, _, d, s = fixed_point_coefficients(P, p)
    root = (s * s + SignedLog.from_float(4.0) * a * d).sqrt()
    return (s + root) / (SignedLog.from_float(2.0) * d)


def quadratic_residual(x: SignedLog, P: float, p: Params) -> float:
    """|x(dx + c) − (a + bx)| relative to the largest of its three terms."""
    a, _, _, d, s = fixed_point_coefficients(P, p)
    square = d * x * x
    linear = s * x
    defect = square - linear - a
    if defect.is_zero:
        return 0.0
    linear_mag = LOG_ZERO if linear.is_zero else linear.log_mag
    scale = max(square.log_mag, linear_mag, a.log_mag)
    return math.exp(min(defect.log_mag - scale, 700.0))


class FixedPointValues(NamedTuple):
    lam: SignedLog
    lam_m1: SignedLog
    e_two: SignedLog
    z0: SignedLog
    z1: SignedLog


def _fixed_point_values(P: float, p: Params, x: SignedLog) -> FixedPointValues:
    return FixedPointValues(
        lam=SignedLog.exp(P),
        lam_m1=SignedLog.exp(math.log(math.expm1(P))),
        e_two=SignedLog.exp(-p.alpha * p.beta),
        z0=x * SignedLog.exp(-p.beta),
        z1=SignedLog.one(),
    )


def H_star_values(P: float, p: Params, x: SignedLog) -> Tuple[SignedLog, SignedLog]:
    """H(0∗₀), H(1∗₁) with H(1^∞) = 1 and H(0^∞) = x e^{-β}."""
    lam, lam_m1, e_two, z0, z1 = _fixed_point_values(P, p, x)
    ratio = lam_m1 / (lam + e_two)
    zero_bracket = lam * z1 - e_two * z0
    one_bracket = lam * z0 - e_two * z1
    if zero_bracket.sign <= 0 or one_bracket.sign <= 0:
        raise NumericalError(f"nonpositive H bracket at P={P!r}; inconsistent pressure")
    return (
        SignedLog.exp(p.beta / 2.0) * ratio * zero_bracket,
        SignedLog.exp(p.gamma_slope * p.beta / 2.0) * ratio * one_bracket,
    )


def H_ring_values(
    n: int, P: float, p: Params, x: SignedLog
) -> Tuple[SignedLog, SignedLog]:
    """H(0ⁿ∗₀), H(1ⁿ∗₁) from the partial-sum closed forms.

    The brackets subtract two nearly equal terms when α < 1 and β is large;
    :func:`H_ring_values_stable` is the cancellation-free equivalent.
    """
    if n < 1:
        raise InvalidParamsError(f"ring index must be >= 1, got {n}")
    beta, gamma_beta = p.beta, p.gamma_slope * p.beta
    lam, lam_m1, e_two, z0, z1 = _fixed_point_values(P, p, x)
    ratio = lam_m1 / (lam + e_two)
    damp = SignedLog.one() + SignedLog.exp(-P - p.alpha * beta)

    zero_bracket = SignedLog.exp(P + beta) * z1 - (
        F_partial(n - 2, P, beta) * damp + SignedLog.exp((1.0 - p.alpha) * beta)
    ) * z0
    one_bracket = SignedLog.exp(P + gamma_beta) * z0 - (
        F_partial(n - 2, P, gamma_beta) * damp
        + SignedLog.exp((p.gamma_slope - p.alpha) * beta)
    ) * z1
    if zero_bracket.sign <= 0 or one_bracket.sign <= 0:
        raise NumericalError(f"nonpositive H bracket at ring {n}, P={P!r}")
    return (
        SignedLog.exp((n - 1) * P - beta / 2.0**n) * ratio * zero_bracket,
        SignedLog.exp((n - 1) * P - gamma_beta / 2.0**n) * ratio * one_bracket,
    )


def H_ring_values_stable(
    n: int, P: float, p: Params, x: SignedLog
) -> Tuple[SignedLog, SignedLog]:
    """H(0ⁿ∗₀) = H(0^∞)(1 − e^{-P}) e^{-β/2ⁿ} F(P, β/2^{n-1}), and the
    slope-Γ analogue, same normalisation as :func:`H_ring_values`."""
    if n < 1:
        raise InvalidParamsError(f"ring index must be >= 1, got {n}")
    _, _, _, z0, z1 = _fixed_point_values(P, p, x)
    gap = _one_minus_exp_neg(P)
    beta, gamma_beta = p.beta, p.gamma_slope * p.beta
    scale = 2.0**n
    h0 = z0 * gap * SignedLog.exp(-beta / scale) * F(P, 2.0 * beta / scale).value
    h1 = z1 * gap * SignedLog.exp(-gamma_beta / scale)
    h1 = h1 * F(P, 2.0 * gamma_beta / scale).value
    return h0, h1


def H_two_value(P: float, p: Params, x: SignedLog) -> SignedLog:
    """H([2]) = (e^P − 1)(H(0^∞) + H(1^∞)) / (e^P + e^{-αβ})."""
    lam, lam_m1, e_two, z0, z1 = _fixed_point_values(P, p, x)
    return lam_m1 * (z0 + z1) / (lam + e_two)


def closed_form_H(P: float, p: Params, x: SignedLog, depth: int) -> RingVector:
    """Eigenfunction on the ring basis; tails carry the fixed-point values."""
    _, _, _, z0, z1 = _fixed_point_values(P, p, x)
    values: Dict[Ring, SignedLog] = {
        Ring.fix0(): z0,
        Ring.fix1(): z1,
        Ring.tail0(depth): z0,
        Ring.tail1(depth): z1,
        Ring.two_head(): H_two_value(P, p, x),
    }
    for n in range(1, depth + 1):
        h0, h1 = H_ring_values_stable(n, P, p, x)
        values[Ring.zero_run(n)], values[Ring.one_run(n)] = h0, h1
    return RingVector.from_mapping(depth, values)


def nu_first_rings(P: float, p: Params) -> Tuple[SignedLog, SignedLog]:
    """ν(0∗₀) = e^{-P-β/2}/(1+u) and ν(1∗₁) = e^{-P-Γβ/2}/(1+v)."""
    u, v, _ = secular_parts(P, p)
    one = SignedLog.one()
    return (
        SignedLog.exp(-P - p.beta / 2.0) / (one + u),
        SignedLog.exp(-P - p.gamma_slope * p.beta / 2.0) / (one + v),
    )


def closed_form_nu(P: float, p: Params, depth: int) -> RingVector:
    """Conformal measure on the ring basis with exact tail aggregates."""
    first0, first1 = nu_first_rings(P, p)
    beta, gamma_beta = p.beta, p.gamma_slope * p.beta
    values: Dict[Ring, SignedLog] = {
        Ring.fix0(): SignedLog.zero(),
        Ring.fix1(): SignedLog.zero(),
        Ring.two_head(): SignedLog.exp(-P - p.alpha * beta),
        Ring.tail0(depth): first0
        * SignedLog.exp(-beta / 2.0 - depth * P)
        * F(P, beta / 2.0**depth).value,
        Ring.tail1(depth): first1
        * SignedLog.exp(-gamma_beta / 2.0 - depth * P)
        * F(P, gamma_beta / 2.0**depth).value,
    }
    for n in range(1, depth + 1):
        drop = (n - 1) * P
        shape = 0.5 - 2.0**-n
        values[Ring.zero_run(n)] = first0 * SignedLog.exp(-drop - beta * shape)
        values[Ring.one_run(n)] = first1 * SignedLog.exp(-drop - gamma_beta * shape)
    return RingVector.from_mapping(depth, values).normalized_mass()


def eigen_triple(
    p: Params, depth: Optional[int] = None, tol: float = DEFAULT_TOL
) -> EigenTriple:
    """Pressure, H and ν from the closed forms, with operator residuals."""
    depth = default_depth(p) if depth is None else depth
    P = solve_pressure(p, tol)
    x = fixed_point_ratio(P, p)
    h = closed_form_H(P, p, x, depth)
    nu = closed_form_nu(P, p, depth)
    op = build_operator(p, depth)
    return EigenTriple(
        params=p,
        depth=depth,
        P=P,
        H=h,
        nu=nu,
        residual_H=residual(op, P, h, "right"),
        residual_nu=residual(op, P, nu, "left"),
    )


# ----------------------------
# Zero-temperature targets
# ----------------------------


@dataclass(frozen=True)
class Limit:
    """A β → ∞ limit: finite ``value``, divergence at exponential ``rate``,
    or unknown when neither is set."""

    value: Optional[float] = None
    diverges: bool = False
    rate: Optional[float] = None

    @classmethod
    def finite(cls, value: float) -> Limit:
        return cls(value=value)

    @classmethod
    def infinite(cls, rate: Optional[float] = None) -> Limit:
        return cls(diverges=True, rate=rate)

    @property
    def known(self) -> bool:
        return self.diverges or self.value is not None

    def as_float(self) -> float:
        if self.diverges:
            return math.inf
        return math.nan if self.value is None else self.value


@dataclass(frozen=True)
class AsymptoticTargets:
    alpha: float
    gamma_slope: float
    mu_ratio: Limit
    x_ratio: Limit
    nu_star_ratio: Limit
    p_e2beta: Limit
    gamma: float
    delta_v: float
    certified: bool

    def to_dict(self) -> Dict[str, object]:
        def limit(l: Limit):
            if l.diverges:
                return {"value": "inf", "rate": l.rate}
            return {"value": l.value}

        return {
            "alpha": self.alpha,
            "gamma_slope": self.gamma_slope,
            "mu_ratio": limit(self.mu_ratio),
            "x_ratio": limit(self.x_ratio),
            "nu_star_ratio": limit(self.nu_star_ratio),
            "P_e2beta": limit(self.p_e2beta),
            "gamma": self.gamma,
            "delta_V": self.delta_v,
            "certified": self.certified,
        }


def critical_alpha(gamma_slope: float) -> float:
    """Level of α at which the selection switches regime: (Γ − 1)/2."""
    return (gamma_slope - 1.0) / 2.0


def limit_targets(alpha: float, gamma_slope: float = 3.0) -> AsymptoticTargets:
    """Zero-temperature limits of the selection quantities.

    For Γ = 3 these are the proven values. For other slopes the regime is
    placed by comparing α with (Γ − 1)/2 and only the μ ratio, γ and ΔV are
    filled in; the result is marked uncertified.
    """
    if not alpha > 0:
        raise InvalidParamsError(f"alpha must be > 0, got {alpha}")
    certified = gamma_slope == 3.0
    level = critical_alpha(gamma_slope)
    at_level = math.isclose(alpha, level, rel_tol=0.0, abs_tol=1e-12)
    delta_v = level if alpha > level or at_level else alpha
    gamma = -(1.0 + delta_v)

    if alpha > level and not at_level:
        mu = Limit.finite(1.0)
        rest = (Limit.finite(1.0), Limit.finite(1.0), Limit.finite(1.0))
    elif at_level:
        mu = Limit.finite(GOLDEN**2)
        rest = (Limit.finite(GOLDEN), Limit.finite(GOLDEN), Limit.finite(GOLDEN))
    else:
        mu = Limit.infinite(rate=2.0 * (level - alpha))
        rest = (
            Limit.infinite(rate=level - alpha),
            Limit.infinite(rate=level - alpha),
            Limit(),
        )
    if not certified:
        rest = (Limit(), Limit(), Limit())
    return AsymptoticTargets(
        alpha=alpha,
        gamma_slope=gamma_slope,
        mu_ratio=mu,
        x_ratio=rest[0],
        nu_star_ratio=rest[1],
        p_e2beta=rest[2],
        gamma=gamma,
        delta_v=delta_v,
        certified=certified,
    )
