"""Ergodic optimization for the two-slope potential.

The maximizing value is 0, attained only by the Dirac measures at 0^∞ and
1^∞. Calibrated subactions are maxima of the two barrier functions
-d(·, 0^∞) and -Γ d(·, 1^∞) shifted by their values at the fixed points.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import List, NamedTuple, Sequence, Tuple

from .closedform import closed_form_H, fixed_point_ratio, solve_pressure
from .errors import InvalidParamsError, NumericalError
from .ringspace import (
    Params,
    Ring,
    RingKind,
    Symbol,
    Word,
    dist_to_fixed,
    potential,
    preimage_rings,
    rings_to_depth,
)

logger = logging.getLogger(__name__)

CERTIFIED_SLOPE = 3.0
ESTIMATE_BETA = 80.0
DEFAULT_RING_DEPTH = 20


def ring_distances(r: Ring) -> Tuple[float, float]:
    """(d(r, 0^∞), d(r, 1^∞)) for a non-tail ring."""
    if r.kind is RingKind.ZERO_RUN:
        return 2.0**-r.n, 1.0
    if r.kind is RingKind.ONE_RUN:
        return 1.0, 2.0**-r.n
    if r.kind is RingKind.TWO_HEAD:
        return 1.0, 1.0
    if r.kind is RingKind.FIX0:
        return 0.0, 1.0
    if r.kind is RingKind.FIX1:
        return 1.0, 0.0
    raise InvalidParamsError(f"distances are not constant on {r.label}")


@dataclass(frozen=True)
class Subaction:
    """V(x) = max(c0 − d(x, 0^∞), c1 − Γ d(x, 1^∞))."""

    c0: float
    c1: float
    gamma_slope: float = CERTIFIED_SLOPE

    def at_ring(self, r: Ring) -> float:
        d0, d1 = ring_distances(r)
        return max(self.c0 - d0, self.c1 - self.gamma_slope * d1)

    def __call__(self, w: Word) -> float:
        return max(
            self.c0 - dist_to_fixed(w, Symbol.ZERO),
            self.c1 - self.gamma_slope * dist_to_fixed(w, Symbol.ONE),
        )


@dataclass(frozen=True)
class MaximizingCertificate:
    value: float
    max_off_fixed: float
    zero_rings: Tuple[Ring, ...]
    measures: Tuple[str, ...] = ("delta_0^inf", "delta_1^inf")
    depth: int = DEFAULT_RING_DEPTH


def maximizing_value(
    p: Params, depth: int = DEFAULT_RING_DEPTH
) -> MaximizingCertificate:
    """m(A) = 0, certified by A ≤ 0 on every ring up to ``depth`` with
    equality exactly at the two fixed points."""
    zero_rings = []
    worst = -math.inf
    for ring in rings_to_depth(depth):
        value = potential(ring, p)
        if ring.is_fixed:
            if value != 0.0:
                raise NumericalError(
                    f"potential at {ring.label} is {value}, expected 0"
                )
            zero_rings.append(ring)
        else:
            if not value < 0.0:
                raise NumericalError(
                    f"potential at {ring.label} is {value}, expected < 0"
                )
            worst = max(worst, value)
    return MaximizingCertificate(
        value=0.0, max_off_fixed=worst, zero_rings=tuple(zero_rings), depth=depth
    )


def subaction_u0(w: Word, p: Params) -> float:
    return -dist_to_fixed(w, Symbol.ZERO)


def subaction_u1(w: Word, p: Params) -> float:
    return -p.gamma_slope * dist_to_fixed(w, Symbol.ONE)


def u0_subaction(p: Params) -> Subaction:
    """u0 in representation form (c0, c1) = (0, −1)."""
    return Subaction(0.0, -1.0, p.gamma_slope)


def u1_subaction(p: Params) -> Subaction:
    """u1 in representation form (c0, c1) = (−Γ, 0)."""
    return Subaction(-p.gamma_slope, 0.0, p.gamma_slope)


def peierls_from_fixed(fp: Ring, w: Word, p: Params) -> float:
    """h(0^∞, w) = u0(w) and h(1^∞, w) = u1(w)."""
    if fp.kind is RingKind.FIX0:
        return subaction_u0(w, p)
    if fp.kind is RingKind.FIX1:
        return subaction_u1(w, p)
    raise InvalidParamsError(
        f"Peierls barrier only from 0^inf or 1^inf, got {fp.label}"
    )


@dataclass(frozen=True)
class VSolution:
    delta_v: float
    gamma: float
    certified: bool = True


def solve_V(
    alpha: float, gamma_slope: float = CERTIFIED_SLOPE, beta: float = ESTIMATE_BETA
) -> VSolution:
    """V(1^∞) − V(0^∞) and lim (1/β) log P.

    Slope 3 uses the proven case split. Any other slope is estimated from
    the closed forms at inverse temperature ``beta`` and marked uncertified.
    """
    if not alpha > 0:
        raise InvalidParamsError(f"alpha must be > 0, got {alpha}")
    if gamma_slope == CERTIFIED_SLOPE:
        if alpha > 1.0:
            return VSolution(delta_v=1.0, gamma=-2.0)
        return VSolution(delta_v=alpha, gamma=-(1.0 + alpha))

    logger.warning("slope %g has no proven V; estimating at beta=%g", gamma_slope, beta)
    p = Params(alpha, gamma_slope, beta)
    P = solve_pressure(p)
    x = fixed_point_ratio(P, p)
    return VSolution(
        delta_v=1.0 - x.log() / beta,
        gamma=math.log(P) / beta,
        certified=False,
    )


def subaction_from_solution(
    v: VSolution, gamma_slope: float = CERTIFIED_SLOPE
) -> Subaction:
    """The calibrated subaction with V(0^∞) = 0 and V(1^∞) = ΔV."""
    return Subaction(0.0, v.delta_v, gamma_slope)


def verify_calibration(
    s: Subaction, p: Params, depth: int = DEFAULT_RING_DEPTH
) -> float:
    """Largest |V(r) − max over branches (A + V)| on rings up to ``depth``."""
    worst = 0.0
    for ring in rings_to_depth(depth):
        best = max(b.value + s.at_ring(b.ring) for b in preimage_rings(ring, p))
        worst = max(worst, abs(s.at_ring(ring) - best))
    return worst


class VComparisonRow(NamedTuple):
    beta: float
    sup_distance: float
    delta_v_estimate: float
    gamma_estimate: float


@dataclass
class VComparison:
    alpha: float
    gamma_slope: float
    solution: VSolution
    rows: List[VComparisonRow] = field(default_factory=list)

    @property
    def decreasing(self) -> bool:
        distances = [r.sup_distance for r in self.rows]
        return all(b <= a for a, b in zip(distances, distances[1:]))


def compare_V_to_H(
    p: Params, beta_grid: Sequence[float], ring_depth: int = DEFAULT_RING_DEPTH
) -> VComparison:
    """Sup-distance between (1/β)(log H − log H(1^∞)) and V − V(1^∞) on rings."""
    solution = solve_V(p.alpha, p.gamma_slope)
    s = subaction_from_solution(solution, p.gamma_slope)
    reference = s.at_ring(Ring.fix1())
    comparison = VComparison(p.alpha, p.gamma_slope, solution)

    for beta in beta_grid:
        if not beta > 0:
            raise InvalidParamsError(f"beta grid must be positive, got {beta}")
        q = p.at_beta(beta)
        P = solve_pressure(q)
        x = fixed_point_ratio(P, q)
        h = closed_form_H(P, q, x, ring_depth)
        # H(1^∞) = 1 in this normalisation
        distance = max(
            abs(h[ring].log() / beta - (s.at_ring(ring) - reference))
            for ring in rings_to_depth(ring_depth)
        )
        comparison.rows.append(
            VComparisonRow(
                beta=beta,
                sup_distance=distance,
                delta_v_estimate=-h[Ring.fix0()].log() / beta,
                gamma_estimate=math.log(P) / beta,
            )
        )
    if not comparison.decreasing:
        logger.info("V distance not monotone along the beta grid for %s", p)
    return comparison
