"""Truncated ring-basis transfer operator.

The eigenfunction of the operator is constant on rings, so the operator
acts on a finite vector indexed by

    Fix0, 0^1*0 .. 0^N*0, tail0(N), Fix1, 1^1*1 .. 1^N*1, tail1(N), [2]

with rows ``(L v)(r) = sum of e^{βA} v(source)`` over the three preimage
branches of r. Everything deeper than N is collapsed into a tail state.
This module is the independent oracle for the closed forms at moderate β.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Dict, Iterator, List, Literal, Mapping, NamedTuple, Tuple

import numpy as np

from .errors import (
    ConvergenceError,
    InvalidParamsError,
    NumericalError,
    SingularSystemError,
)
from .ringspace import (
    Params,
    Ring,
    RingKind,
    Symbol,
    Word,
    preimage_rings,
    ring_of,
)
from .signedlog import SignedLog, signed_sum

logger = logging.getLogger(__name__)

LN3 = math.log(3.0)
MIN_DEPTH = 3
SMALL_BETA_CAP = 4.0

__all__ = [
    "SignedLog",
    "RingVector",
    "TruncatedOperator",
    "EigenTriple",
    "LeadingPair",
    "ring_basis",
    "default_depth",
    "build_operator",
    "leading_pair_power",
    "eigenfunction_given_P",
    "eigenmeasure_given_P",
    "residual",
    "truncation_bound",
    "iterate_on_word",
    "iterate_on_word_series",
]


@lru_cache(maxsize=None)
def ring_basis(depth: int) -> Tuple[Ring, ...]:
    """State order of every RingVector of the given depth."""
    if depth < MIN_DEPTH:
        raise InvalidParamsError(f"depth must be >= {MIN_DEPTH}, got {depth}")
    states: List[Ring] = [Ring.fix0()]
    states.extend(Ring.zero_run(n) for n in range(1, depth + 1))
    states.append(Ring.tail0(depth))
    states.append(Ring.fix1())
    states.extend(Ring.one_run(n) for n in range(1, depth + 1))
    states.append(Ring.tail1(depth))
    states.append(Ring.two_head())
    return tuple(states)


@lru_cache(maxsize=None)
def _basis_index(depth: int) -> Dict[Ring, int]:
    return {ring: i for i, ring in enumerate(ring_basis(depth))}


def default_depth(p: Params) -> int:
    """max(48, ceil(log2(Γβ)) + 40)."""
    scale = p.gamma_slope * p.beta
    if scale <= 1.0:
        return 48
    return max(48, math.ceil(math.log2(scale)) + 40)


def truncation_bound(p: Params, depth: int) -> float:
    """Relative error bound on row weights from collapsing rings deeper
    than ``depth``."""
    return math.expm1(p.gamma_slope * p.beta / 2.0 ** (depth + 1))


@dataclass(frozen=True)
class RingVector:
    """SignedLog values over :func:`ring_basis` of ``depth``."""

    depth: int
    values: Tuple[SignedLog, ...]

    def __post_init__(self):
        expected = len(ring_basis(self.depth))
        if len(self.values) != expected:
            raise InvalidParamsError(
                f"depth {self.depth} needs {expected} entries, got {len(self.values)}"
            )

    @classmethod
    def from_mapping(cls, depth: int, mapping: Mapping[Ring, SignedLog]) -> RingVector:
        missing = [r.label for r in ring_basis(depth) if r not in mapping]
        if missing:
            raise InvalidParamsError(f"missing ring values: {', '.join(missing[:5])}")
        return cls(depth, tuple(mapping[r] for r in ring_basis(depth)))

    @classmethod
    def from_floats(cls, depth: int, values) -> RingVector:
        return cls(depth, tuple(SignedLog.from_float(float(v)) for v in values))

    @property
    def states(self) -> Tuple[Ring, ...]:
        return ring_basis(self.depth)

    def __getitem__(self, ring: Ring) -> SignedLog:
        try:
            return self.values[_basis_index(self.depth)[ring]]
        except KeyError:
            raise KeyError(
                f"{ring.label} is not a state at depth {self.depth}"
            ) from None

    def items(self) -> Iterator[Tuple[Ring, SignedLog]]:
        return zip(self.states, self.values)

    def total(self) -> SignedLog:
        return signed_sum(self.values)

    def scaled(self, factor: SignedLog) -> RingVector:
        return RingVector(self.depth, tuple(v * factor for v in self.values))

    def normalized_at(self, ring: Ring) -> RingVector:
        return self.scaled(SignedLog.one() / self[ring])

    def normalized_mass(self) -> RingVector:
        return self.scaled(SignedLog.one() / self.total())

    def with_entry(self, ring: Ring, value: SignedLog) -> RingVector:
        values = list(self.values)
        values[_basis_index(self.depth)[ring]] = value
        return RingVector(self.depth, tuple(values))

    def to_floats(self) -> np.ndarray:
        return np.array([v.to_float() for v in self.values])

    @property
    def all_positive(self) -> bool:
        return all(v.sign > 0 for v in self.values)


class Term(NamedTuple):
    source: Ring
    weight: SignedLog


@dataclass(frozen=True, eq=False)
class TruncatedOperator:
    params: Params
    depth: int
    rows: Mapping[Ring, Tuple[Term, ...]]

    @property
    def states(self) -> Tuple[Ring, ...]:
        return ring_basis(self.depth)

    def weight(self, row: Ring, source: Ring) -> SignedLog:
        for term in self.rows[row]:
            if term.source == source:
                return term.weight
        raise KeyError(f"row {row.label} has no branch from {source.label}")

    def apply(self, v: RingVector) -> RingVector:
        """(L v)(r) over every state."""
        return RingVector(
            self.depth,
            tuple(
                signed_sum(t.weight * v[t.source] for t in self.rows[r])
                for r in self.states
            ),
        )

    def apply_adjoint(self, nu: RingVector) -> RingVector:
        """(L* ν)(s): mass flowing into every source state."""
        inflow: Dict[Ring, List[SignedLog]] = {s: [] for s in self.states}
        for r in self.states:
            for t in self.rows[r]:
                inflow[t.source].append(t.weight * nu[r])
        return RingVector(self.depth, tuple(signed_sum(inflow[s]) for s in self.states))

    def to_matrix(self) -> np.ndarray:
        index = _basis_index(self.depth)
        size = len(self.states)
        matrix = np.zeros((size, size))
        for r in self.states:
            for t in self.rows[r]:
                matrix[index[r], index[t.source]] += t.weight.to_float()
        return matrix


def build_operator(p: Params, depth: int | None = None) -> TruncatedOperator:
    """Rows of the truncated operator, weights e^{β·A} kept exactly in log form."""
    depth = default_depth(p) if depth is None else depth
    if depth < MIN_DEPTH:
        raise InvalidParamsError(f"depth must be >= {MIN_DEPTH}, got {depth}")

    def term(source: Ring, value: float) -> Term:
        return Term(source, SignedLog.exp(p.beta * value))

    def redirect(ring: Ring) -> Ring:
        if ring.kind is RingKind.ZERO_RUN and ring.n > depth:
            return Ring.tail0(depth)
        if ring.kind is RingKind.ONE_RUN and ring.n > depth:
            return Ring.tail1(depth)
        return ring

    rows: Dict[Ring, Tuple[Term, ...]] = {}
    for ring in ring_basis(depth):
        if ring.kind is RingKind.TAIL0:
            rows[ring] = (
                term(ring, -1.0 / 2.0 ** (depth + 2)),
                term(Ring.one_run(1), -p.gamma_slope / 2.0),
                term(Ring.two_head(), -p.alpha),
            )
        elif ring.kind is RingKind.TAIL1:
            rows[ring] = (
                term(Ring.zero_run(1), -0.5),
                term(ring, -p.gamma_slope / 2.0 ** (depth + 2)),
                term(Ring.two_head(), -p.alpha),
            )
        else:
            rows[ring] = tuple(
                term(redirect(b.ring), b.value) for b in preimage_rings(ring, p)
            )
    return TruncatedOperator(p, depth, rows)


class LeadingPair(NamedTuple):
    P: float
    H: RingVector


def leading_pair_power(
    op: TruncatedOperator,
    tol: float = 1e-13,
    max_iter: int = 200_000,
    small_beta_cap: float = SMALL_BETA_CAP,
) -> LeadingPair:
    """Leading eigenvalue and right eigenvector by power iteration.

    Parameters
    ----------
    op : TruncatedOperator
        Operator with ``op.params.beta <= small_beta_cap``.
    tol : float
        Bound on the estimated remaining error of ``log λ``; the contraction
        rate of successive updates turns the last step into that estimate.
    max_iter : int
        Iteration budget.

    Returns
    -------
    LeadingPair
        ``P = log λ`` and the eigenvector normalised by H(Fix1) = 1.
    """
    beta = op.params.beta
    if beta > small_beta_cap:
        raise ConvergenceError(
            f"power iteration is limited to beta <= {small_beta_cap} (got {beta}); "
            "use closedform.solve_pressure"
        )

    matrix = op.to_matrix()
    vec = np.ones(matrix.shape[0])
    log_lam_prev = None
    delta_prev = None

    for iteration in range(1, max_iter + 1):
        image = matrix @ vec
        scale = float(image.max())
        vec = image / scale
        log_lam = math.log(scale)

        if log_lam_prev is not None:
            delta = abs(log_lam - log_lam_prev)
            converged = delta <= 4 * np.finfo(float).eps
            if not converged and delta_prev:
                rate = delta / delta_prev
                converged = rate < 1.0 and delta * rate / (1.0 - rate) <= tol
            if converged:
                logger.debug(
                    "power iteration converged after %d steps (beta=%g)",
                    iteration,
                    beta,
                )
                h = vec / vec[_basis_index(op.depth)[Ring.fix1()]]
                return LeadingPair(log_lam, RingVector.from_floats(op.depth, h))
            delta_prev = delta
        log_lam_prev = log_lam

        if iteration == int(0.9 * max_iter):
            logger.warning("power iteration at 90%% of its budget (beta=%g)", beta)

    raise ConvergenceError(
        f"power iteration did not converge in {max_iter} steps (beta={beta})",
        iterations=max_iter,
    )


def _chain_weights(
    op: TruncatedOperator, symbol: int
) -> Tuple[List[SignedLog], SignedLog]:
    """Deep-branch weights along one ring chain, plus the tail self-weight.

    Entry k of the list is the weight in row run(k+1) of its deep source.
    """
    run = Ring.zero_run if symbol == 0 else Ring.one_run
    tail = Ring.tail0(op.depth) if symbol == 0 else Ring.tail1(op.depth)
    deep: List[SignedLog] = []
    for n in range(1, op.depth + 1):
        source = run(n + 1) if n < op.depth else tail
        deep.append(op.weight(run(n), source))
    return deep, op.weight(tail, tail)


def _backward_chain(
    deep: List[SignedLog], tail_self: SignedLog, lam: SignedLog, lam_m1: SignedLog
) -> Tuple[List[SignedLog], SignedLog]:
    """Ring values of one chain relative to its fixed point.

    Uses λ h(n) = w h(n+1) + (λ − 1) h(fix), solved from the tail inwards
    so every step adds positive terms.
    """
    closure = lam - tail_self
    if closure.sign <= 0:
        raise NumericalError("tail closure does not contract; is P > 0?")
    tail_value = lam_m1 / closure
    values: List[SignedLog] = [SignedLog.zero()] * len(deep)
    following = tail_value
    for k in range(len(deep) - 1, -1, -1):
        values[k] = (deep[k] * following + lam_m1) / lam
        following = values[k]
    return values, tail_value


def eigenfunction_given_P(
    op: TruncatedOperator, P: float, check_tol: float | None = None
) -> RingVector:
    """Right eigenvector for a known eigenvalue e^P, normalised by H(Fix1) = 1.

    Both ring chains are back-substituted from their tails, the ratio
    H(0^∞)/H(1^∞) follows from the two fixed-point rows and H([2]) from its
    own row. With ``check_tol`` set, a residual above it raises
    :class:`SingularSystemError`.
    """
    if not 0.0 < P <= LN3 * (1 + 1e-12):
        raise InvalidParamsError(f"P must lie in (0, ln 3], got {P}")
    lam = SignedLog.exp(P)
    lam_m1 = SignedLog.exp(math.log(math.expm1(P)))

    two = Ring.two_head()
    w0 = op.weight(two, Ring.zero_run(1))
    w1 = op.weight(two, Ring.one_run(1))
    e_two = op.weight(two, two)

    zeros, tail0 = _backward_chain(*_chain_weights(op, 0), lam, lam_m1)
    ones, tail1 = _backward_chain(*_chain_weights(op, 1), lam, lam_m1)

    z1 = SignedLog.one()
    z0 = (lam_m1 + w1 * ones[0]) / (lam_m1 + w0 * zeros[0])
    h2 = (w0 * zeros[0] * z0 + w1 * ones[0] * z1) / (lam - e_two)

    values: Dict[Ring, SignedLog] = {
        Ring.fix0(): z0,
        Ring.tail0(op.depth): tail0 * z0,
        Ring.fix1(): z1,
        Ring.tail1(op.depth): tail1 * z1,
        two: h2,
    }
    for n in range(1, op.depth + 1):
        values[Ring.zero_run(n)] = zeros[n - 1] * z0
        values[Ring.one_run(n)] = ones[n - 1] * z1
    h = RingVector.from_mapping(op.depth, values)

    if check_tol is not None:
        res = residual(op, P, h, "right")
        if res > check_tol:
            raise SingularSystemError(
                f"P={P!r} is not an eigenvalue of the operator (residual {res:.3g})",
                residual=res,
            )
    return h


def _forward_chain(
    deep: List[SignedLog], tail_self: SignedLog, neg_p: SignedLog
) -> Tuple[List[SignedLog], SignedLog]:
    """ν of a ring chain relative to its first ring, plus the tail aggregate."""
    ratios = [SignedLog.one()]
    for k in range(len(deep) - 1):
        ratios.append(ratios[-1] * neg_p * deep[k])
    denominator = SignedLog.one() - neg_p * tail_self
    if denominator.sign <= 0:
        raise NumericalError(
            "tail closure of the measure diverges; need e^P > tail weight"
        )
    tail = ratios[-1] * neg_p * deep[-1] / denominator
    return ratios, tail


def eigenmeasure_given_P(op: TruncatedOperator, P: float) -> RingVector:
    """Conformal masses ν for a known e^P, total mass 1, no atoms at fixed points."""
    if not 0.0 < P <= LN3 * (1 + 1e-12):
        raise InvalidParamsError(f"P must lie in (0, ln 3], got {P}")
    neg_p = SignedLog.exp(-P)
    two = Ring.two_head()
    w0 = op.weight(two, Ring.zero_run(1))
    w1 = op.weight(two, Ring.one_run(1))
    e_two = op.weight(two, two)

    zeros, tail0 = _forward_chain(*_chain_weights(op, 0), neg_p)
    ones, tail1 = _forward_chain(*_chain_weights(op, 1), neg_p)

    # ν(0*0) = e^{-P}w0 (1 - ν[0]) with ν[0] = ν(0*0)·(chain sum)
    first0 = neg_p * w0
    first1 = neg_p * w1
    u = first0 * signed_sum(zeros + [tail0])
    v = first1 * signed_sum(ones + [tail1])
    first0 = first0 / (SignedLog.one() + u)
    first1 = first1 / (SignedLog.one() + v)

    values: Dict[Ring, SignedLog] = {
        Ring.fix0(): SignedLog.zero(),
        Ring.fix1(): SignedLog.zero(),
        Ring.tail0(op.depth): tail0 * first0,
        Ring.tail1(op.depth): tail1 * first1,
        two: neg_p * e_two,
    }
    for n in range(1, op.depth + 1):
        values[Ring.zero_run(n)] = zeros[n - 1] * first0
        values[Ring.one_run(n)] = ones[n - 1] * first1
    return RingVector.from_mapping(op.depth, values).normalized_mass()


def residual(
    op: TruncatedOperator, P: float, v: RingVector, side: Literal["left", "right"]
) -> float:
    """max over states of |(L v) − e^P v| / |e^P v| (adjoint for ``left``).

    States where e^P v vanishes contribute the absolute defect.
    """
    if side == "right":
        image = op.apply(v)
    elif side == "left":
        image = op.apply_adjoint(v)
    else:
        raise ValueError(f"side must be 'left' or 'right', got {side!r}")

    lam = SignedLog.exp(P)
    worst = 0.0
    for state, value in v.items():
        target = lam * value
        defect = image[state] - target
        if defect.is_zero:
            continue
        if target.is_zero:
            worst = max(worst, abs(defect).to_float())
        else:
            worst = max(worst, math.exp(min(defect.log_mag - target.log_mag, 700.0)))
    return worst


@dataclass(frozen=True)
class EigenTriple:
    params: Params
    depth: int
    P: float
    H: RingVector
    nu: RingVector
    residual_H: float
    residual_nu: float

    def __post_init__(self):
        if not 0.0 < self.P <= LN3 * (1 + 1e-12):
            raise NumericalError(f"pressure {self.P!r} outside (0, ln 3]")
        if not (math.isfinite(self.residual_H) and math.isfinite(self.residual_nu)):
            raise NumericalError("non-finite residual")


def iterate_on_word_series(w: Word, k_max: int, p: Params) -> List[SignedLog]:
    """(L^k 1)(w) for k = 0..k_max by enumerating the 3^k preimages of [w].

    Preimage words are grown one prepended symbol at a time; the run length
    behind each new symbol is counted on the actual word, so the value is
    never read off the ring of ``w``. ``w`` must contain a symbol change.
    """
    if k_max < 0:
        raise InvalidParamsError(f"k must be >= 0, got {k_max}")
    head = ring_of(w)
    if head.unresolved:
        raise InvalidParamsError(f"word {w} does not determine its ring")
    run = 1
    while w[0] != Symbol.TWO and w[run] == w[0]:
        run += 1

    first = np.array([w[0]])
    runs = np.array([run])
    logs = np.zeros(1)
    out = [SignedLog.one()]
    for _ in range(k_max):
        size = len(first)
        symbol = np.repeat(np.arange(3), size)
        runs = np.where(symbol == np.tile(first, 3), np.tile(runs, 3) + 1, 1)
        slope = np.where(symbol == Symbol.ONE, p.gamma_slope, 1.0)
        value = np.where(symbol == Symbol.TWO, -p.alpha, -slope * 0.5**runs)
        logs = np.tile(logs, 3) + p.beta * value
        first = symbol
        top = float(logs.max())
        out.append(SignedLog.exp(top + math.log(float(np.exp(logs - top).sum()))))
    return out


def iterate_on_word(w: Word, k: int, p: Params) -> SignedLog:
    """(L^k 1)(w) by direct enumeration of the 3^k preimages of [w]."""
    return iterate_on_word_series(w, k, p)[-1]
