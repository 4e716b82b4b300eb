"""Equilibrium masses and the zero-temperature selection sweep.

μ_β = H_β ν_β normalised to mass one. Everything here is read off the ring
vectors of :func:`closedform.eigen_triple`; cylinders of arbitrary words go
through the conformality of ν.
"""

from __future__ import annotations

import dataclasses
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import lru_cache
from typing import Dict, Iterable, List, NamedTuple, Optional, Sequence, Tuple

from .closedform import (
    DEFAULT_TOL,
    AsymptoticTargets,
    H_ring_values_stable,
    eigen_triple,
    fixed_point_ratio,
    limit_targets,
    nu_ratio_cyl,
    nu_ratio_star,
    solve_pressure,
)
from .errors import InvalidParamsError, NumericalError
from .ringspace import (
    Params,
    Ring,
    RingKind,
    Symbol,
    as_word,
    potential,
    ring_of,
    words_of_length,
)
from .signedlog import SignedLog, relative_gap, signed_sum
from .xferop import EigenTriple, RingVector, truncation_bound

logger = logging.getLogger(__name__)

BETA0_GRID: Tuple[float, ...] = tuple(float(b) for b in range(1, 41))
BETA0_RINGS = range(3, 11)
# relative band for a finite μ ratio target at the largest β of a sweep
MU_RATIO_BAND = 0.1
# absolute band for the exponential rate of a diverging μ ratio
RATE_BAND = 0.05


def _tail(symbol: int, depth: int) -> Ring:
    return Ring.tail0(depth) if symbol == Symbol.ZERO else Ring.tail1(depth)


@dataclass(frozen=True)
class GibbsRingMasses:
    params: Params
    depth: int
    P: float
    x: SignedLog
    H: RingVector
    nu: RingVector
    masses: RingVector
    normalizer: SignedLog
    tail_error: float

    def run_mass(self, symbol: int) -> SignedLog:
        """μ[a] for a ∈ {0, 1, 2}."""
        if symbol == Symbol.TWO:
            return self.masses[Ring.two_head()]
        tail = _tail(symbol, self.depth)
        rings = [Ring.run(symbol, n) for n in range(1, self.depth + 1)]
        return signed_sum([self.masses[r] for r in rings] + [self.masses[tail]])

    def total(self) -> SignedLog:
        return self.masses.total()


def gibbs_masses(
    p: Params,
    depth: Optional[int] = None,
    tol: float = DEFAULT_TOL,
    triple: Optional[EigenTriple] = None,
) -> GibbsRingMasses:
    """Ring masses of μ_β; reuses ``triple`` when the caller already has it."""
    if triple is None:
        triple = eigen_triple(p, depth, tol)
    h, nu = triple.H, triple.nu
    products = tuple(a * b for a, b in zip(h.values, nu.values))
    normalizer = signed_sum(products)
    if normalizer.sign <= 0:
        raise NumericalError(f"nonpositive normaliser ∫H dν for {p}")
    masses = RingVector(triple.depth, products).scaled(SignedLog.one() / normalizer)
    # H(1^∞) = 1 and H(0^∞) = x e^{-β}
    x = h[Ring.fix0()] / h[Ring.fix1()] * SignedLog.exp(p.beta)
    return GibbsRingMasses(
        params=p,
        depth=triple.depth,
        P=triple.P,
        x=x,
        H=h,
        nu=nu,
        masses=masses,
        normalizer=normalizer,
        tail_error=truncation_bound(p, triple.depth),
    )


def mu_cylinder_masses(g: GibbsRingMasses) -> Tuple[SignedLog, SignedLog, SignedLog]:
    return g.run_mass(Symbol.ZERO), g.run_mass(Symbol.ONE), g.run_mass(Symbol.TWO)


def selection_ratio(g: GibbsRingMasses) -> SignedLog:
    """μ[0]/μ[1] summed over the ring series."""
    return g.run_mass(Symbol.ZERO) / g.run_mass(Symbol.ONE)


def sandwich_center(g: GibbsRingMasses) -> SignedLog:
    """e^{(Γ−3)β/2} x ν[0∗₀]/ν[1∗₁]; the μ ratio of every ring pair sits
    below it by the factor F(P, β/2^{n-1})/F(P, Γβ/2^{n-1})."""
    p = g.params
    shift = SignedLog.exp((p.gamma_slope - 3.0) * p.beta / 2.0)
    return shift * g.x * nu_ratio_star(g.P, p)


# ----------------------------
# Cylinders of arbitrary words
# ----------------------------


def _constant_run(
    g: GibbsRingMasses, vector: RingVector, symbol: int, length: int
) -> SignedLog:
    """Σ_{n≥length} vector(run(symbol, n)) + tail."""
    if length > g.depth:
        raise InvalidParamsError(f"run of length {length} is below depth {g.depth}")
    tail = _tail(symbol, g.depth)
    terms = [vector[Ring.run(symbol, n)] for n in range(length, g.depth + 1)]
    return signed_sum(terms + [vector[tail]])


def cylinder_nu(g: GibbsRingMasses, w) -> SignedLog:
    """ν([w]) by peeling the word one symbol at a time:
    ν([a w']) = e^{-P + β A([a w'])} ν([w'])."""
    w = as_word(w)
    if len(w) == 0:
        return SignedLog.one()
    p = g.params
    if w[0] == Symbol.TWO:
        return SignedLog.exp(-g.P - p.alpha * p.beta) * cylinder_nu(g, w.shift())
    if w.is_constant:
        return _constant_run(g, g.nu, w[0], len(w))
    ring = ring_of(w).ring
    return SignedLog.exp(-g.P + p.beta * potential(ring, p)) * cylinder_nu(g, w.shift())


def _H_on(g: GibbsRingMasses, ring: Ring) -> SignedLog:
    if ring.n > g.depth:
        return g.H[Ring.fix0() if ring.kind is RingKind.ZERO_RUN else Ring.fix1()]
    return g.H[ring]


def cylinder_mass(g: GibbsRingMasses, w) -> SignedLog:
    """μ([w]) = ∫_{[w]} H dν / ∫ H dν."""
    w = as_word(w)
    if len(w) == 0:
        return SignedLog.one()
    if w[0] != Symbol.TWO and w.is_constant:
        return _constant_run(g, g.masses, w[0], len(w))
    ring = ring_of(w).ring
    return _H_on(g, ring) * cylinder_nu(g, w) / g.normalizer


def shift_invariance_defect(g: GibbsRingMasses, max_length: int = 6) -> float:
    """Largest relative gap between μ([w]) and Σ_a μ([a w]) over words with
    1 ≤ |w| ≤ max_length."""
    worst = 0.0
    for length in range(1, max_length + 1):
        for w in words_of_length(length):
            preimages = signed_sum(cylinder_mass(g, w.prepend(a)) for a in Symbol)
            worst = max(worst, relative_gap(cylinder_mass(g, w), preimages))
    return worst


def ring_selection_rates(g: GibbsRingMasses, n_max: int = 5) -> List[float]:
    """(1/β) log μ(0ⁿ∗₀)/μ(1ⁿ∗₁) for n = 1..n_max."""
    beta = g.params.beta
    if not beta > 0:
        raise InvalidParamsError("ring selection rates need beta > 0")
    return [
        (g.masses[Ring.zero_run(n)] / g.masses[Ring.one_run(n)]).log() / beta
        for n in range(1, n_max + 1)
    ]


# ----------------------------
# Sandwich and β₀
# ----------------------------


def correction_deviation(n: int, P: float, p: Params, x: SignedLog) -> float:
    """|e^{β − (Γ−1)β/2ⁿ} H(0ⁿ∗₀)/(x H(1ⁿ∗₁)) − 1|."""
    h0, h1 = H_ring_values_stable(n, P, p, x)
    exponent = p.beta - (p.gamma_slope - 1.0) * p.beta / 2.0**n
    scaled = SignedLog.exp(exponent) * h0 / (x * h1)
    return abs((scaled - SignedLog.one()).to_float())


@lru_cache(maxsize=64)
def locate_beta0(
    alpha: float,
    gamma_slope: float = 3.0,
    beta_grid: Tuple[float, ...] = BETA0_GRID,
    n_range: Tuple[int, int] = (BETA0_RINGS.start, BETA0_RINGS.stop),
) -> Optional[float]:
    """Smallest grid β from which every larger grid β satisfies the
    correction inequality on rings ``n_range``; None if the last one fails."""
    held = []
    for beta in beta_grid:
        p = Params(alpha, gamma_slope, beta)
        P = solve_pressure(p)
        x = fixed_point_ratio(P, p)
        bound = math.exp(-beta / 8.0)
        deviations = (correction_deviation(n, P, p, x) for n in range(*n_range))
        held.append(all(d <= bound for d in deviations))

    beta0 = None
    for beta, ok in zip(reversed(beta_grid), reversed(held)):
        if not ok:
            break
        beta0 = beta
    logger.debug("beta0(alpha=%g, gamma=%g) = %s", alpha, gamma_slope, beta0)
    return beta0


@dataclass(frozen=True)
class SandwichReport:
    beta: float
    beta0: Optional[float]
    applicable: bool
    mu_ratio: float = math.nan
    center: float = math.nan
    lower_margin: float = math.nan
    upper_margin: float = math.nan
    head_deviation: float = math.nan
    head_weight: float = math.nan

    @property
    def holds(self) -> bool:
        return self.applicable and self.lower_margin >= 0 and self.upper_margin >= 0


def sandwich_check(
    p: Params, beta: float, n_max: int = 10, beta0: Optional[float] = None
) -> SandwichReport:
    """Check (1 − e^{-β/8}) C ≤ μ[0]/μ[1] ≤ (1 + e^{-β/8}) C at one β.

    ``head_deviation`` and ``head_weight`` describe rings 1 and 2, which the
    correction inequality leaves out.
    """
    if beta0 is None:
        beta0 = locate_beta0(p.alpha, p.gamma_slope)
    if beta0 is None or beta < beta0:
        logger.warning("sandwich not applicable at beta=%g (beta0=%s)", beta, beta0)
        return SandwichReport(beta=beta, beta0=beta0, applicable=False)

    q = p.at_beta(beta)
    g = gibbs_masses(q)
    ratio = selection_ratio(g)
    center = sandwich_center(g)
    eps = SignedLog.exp(-beta / 8.0)
    one = SignedLog.one()
    relative = ratio / center

    head = [correction_deviation(n, g.P, q, g.x) for n in range(1, min(2, n_max) + 1)]
    head_mass = signed_sum(g.masses[Ring.one_run(n)] for n in (1, 2))
    head_mass = head_mass / g.run_mass(Symbol.ONE)
    return SandwichReport(
        beta=beta,
        beta0=beta0,
        applicable=True,
        mu_ratio=ratio.to_float(),
        center=center.to_float(),
        lower_margin=(relative - (one - eps)).to_float(),
        upper_margin=((one + eps) - relative).to_float(),
        head_deviation=max(head),
        head_weight=head_mass.to_float(),
    )


# ----------------------------
# Extrapolation
# ----------------------------


class Extrapolation(NamedTuple):
    estimate: float
    uncertainty: float
    mode: str


def extrapolate(values: Sequence[float], mode: str = "aitken") -> Extrapolation:
    """Estimate the limit of a sequence sampled along increasing β.

    ``aitken`` applies one Δ² step to the last three values; ``last`` takes
    the last value. The uncertainty is the size of the last correction.
    """
    vals = [float(v) for v in values]
    if not all(math.isfinite(v) for v in vals):
        raise ValueError("extrapolate needs finite values")
    if mode not in ("aitken", "last"):
        raise ValueError(f"unknown extrapolation mode {mode!r}")
    if len(vals) < 2:
        raise ValueError("extrapolate needs at least two values")

    if mode == "last" or len(vals) < 3:
        return Extrapolation(vals[-1], abs(vals[-1] - vals[-2]), "last")

    x0, x1, x2 = vals[-3:]
    d1, d2 = x1 - x0, x2 - x1
    denom = d2 - d1
    if denom == 0.0 or abs(denom) <= 1e-15 * max(abs(x0), abs(x1), abs(x2)):
        return Extrapolation(x2, abs(d2), mode)
    estimate = x2 - d2 * d2 / denom
    return Extrapolation(estimate, abs(estimate - x2), mode)


# ----------------------------
# Selection sweep
# ----------------------------


@dataclass(frozen=True)
class SelectionRecord:
    alpha: float
    gamma_slope: float
    beta: float
    depth: int
    P: float
    x_ratio: float
    nu_cyl_ratio: float
    nu_star_ratio: float
    mu0: float
    mu1: float
    mu2: float
    mu_ratio: float
    targets: AsymptoticTargets
    residual_H: float
    residual_nu: float
    nu0: float = math.nan
    target_met: Optional[bool] = None

    @property
    def certified(self) -> bool:
        return self.targets.certified

    @property
    def log_P_over_beta(self) -> float:
        return math.log(self.P) / self.beta if self.beta > 0 else math.nan

    @property
    def P_e2beta(self) -> float:
        return (SignedLog.exp(math.log(self.P) + 2.0 * self.beta)).to_float()

    def to_dict(self) -> Dict[str, object]:
        return {
            "alpha": self.alpha,
            "gamma_slope": self.gamma_slope,
            "beta": self.beta,
            "depth": self.depth,
            "P": self.P,
            "log_P_over_beta": self.log_P_over_beta,
            "P_e2beta": self.P_e2beta,
            "x_ratio": self.x_ratio,
            "nu_cyl_ratio": self.nu_cyl_ratio,
            "nu_star_ratio": self.nu_star_ratio,
            "mu0": self.mu0,
            "mu1": self.mu1,
            "mu2": self.mu2,
            "mu_ratio": self.mu_ratio,
            "target_mu_ratio": self.targets.mu_ratio.as_float(),
            "target_gamma": self.targets.gamma,
            "residual_H": self.residual_H,
            "residual_nu": self.residual_nu,
            "certified": self.certified,
        }


def selection_record(
    p: Params,
    depth: Optional[int] = None,
    tol: float = DEFAULT_TOL,
    triple: Optional[EigenTriple] = None,
) -> SelectionRecord:
    if triple is None:
        triple = eigen_triple(p, depth, tol)
    g = gibbs_masses(p, triple=triple)
    mu0, mu1, mu2 = mu_cylinder_masses(g)
    record = SelectionRecord(
        alpha=p.alpha,
        gamma_slope=p.gamma_slope,
        beta=p.beta,
        depth=triple.depth,
        P=triple.P,
        x_ratio=g.x.to_float(),
        nu_cyl_ratio=nu_ratio_cyl(triple.P, p).to_float(),
        nu_star_ratio=nu_ratio_star(triple.P, p).to_float(),
        mu0=mu0.to_float(),
        mu1=mu1.to_float(),
        mu2=mu2.to_float(),
        mu_ratio=(mu0 / mu1).to_float(),
        targets=limit_targets(p.alpha, p.gamma_slope),
        residual_H=triple.residual_H,
        residual_nu=triple.residual_nu,
        nu0=_constant_run(g, g.nu, Symbol.ZERO, 1).to_float(),
    )
    logger.info(
        "alpha=%g gamma=%g beta=%g: P=%.6g mu_ratio=%.6g",
        p.alpha,
        p.gamma_slope,
        p.beta,
        record.P,
        record.mu_ratio,
    )
    return record


def target_met(record: SelectionRecord) -> Optional[bool]:
    """Whether the μ ratio at this β agrees with its zero-temperature limit.

    None when the limit is unknown or β = 0.
    """
    limit = record.targets.mu_ratio
    if not limit.known or record.beta <= 0:
        return None
    if limit.diverges:
        if limit.rate is None:
            return record.mu_ratio > 1.0
        rate = math.log(record.mu_ratio) / record.beta
        return abs(rate - limit.rate) <= RATE_BAND
    return abs(record.mu_ratio / limit.value - 1.0) <= MU_RATIO_BAND


def selection_report(
    alpha_grid: Iterable[float],
    beta_grid: Sequence[float],
    gamma_slope: float = 3.0,
    depth: Optional[int] = None,
    tol: float = DEFAULT_TOL,
    threads: Optional[int] = None,
) -> List[SelectionRecord]:
    """Records over the (α, β) grid in row-major order; rows at the largest
    β carry ``target_met``."""
    points = [
        Params(alpha, gamma_slope, beta) for alpha in alpha_grid for beta in beta_grid
    ]
    if not points:
        raise InvalidParamsError("empty alpha or beta grid")

    with ThreadPoolExecutor(max_workers=threads) as pool:
        records = list(pool.map(lambda q: selection_record(q, depth, tol), points))

    largest = max(beta_grid)
    return [
        dataclasses.replace(r, target_met=target_met(r)) if r.beta == largest else r
        for r in records
    ]
