"""Signed log-domain reals.

Quantities in this package routinely sit at e^{±cβ} with β in the tens, so
they are carried as ``(sign, log|value|)`` pairs and only turned into floats
for reporting.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import total_ordering
from typing import Iterable, List, Sequence, Union

import mpmath

LOG_ZERO = float("-inf")

# Below this log-gap a subtraction is redone in extended precision.
CANCELLATION_GAP = 1e-12
HIGH_PRECISION_DPS = 50

Number = Union["SignedLog", int, float]


def logsumexp(xs: Sequence[float]) -> float:
    """Accurate log-domain sum of a collection of logs.

    Args:
        xs: log-domain numbers; ``-inf`` entries stand for zeros.

    Returns:
        ``log(sum(exp(x) for x in xs))`` without overflow.
    """
    if not xs:
        return LOG_ZERO

    maximum = max(xs)
    if math.isinf(maximum):
        return maximum

    total = math.fsum(math.expm1(x - maximum) for x in xs)
    return maximum + math.log1p(total + float(len(xs) - 1))


@total_ordering
@dataclass(frozen=True)
class SignedLog:
    """A real number stored as a sign and the natural log of its magnitude."""

    sign: int = 0
    log_mag: float = LOG_ZERO

    def __post_init__(self):
        if self.sign not in (-1, 0, 1):
            raise ValueError(f"sign must be -1, 0 or 1, got {self.sign!r}")
        if self.sign == 0 or self.log_mag == LOG_ZERO:
            object.__setattr__(self, "sign", 0)
            object.__setattr__(self, "log_mag", LOG_ZERO)
            return
        if math.isnan(self.log_mag) or math.isinf(self.log_mag):
            raise ValueError(f"log magnitude must be finite, got {self.log_mag!r}")
        object.__setattr__(self, "log_mag", float(self.log_mag))

    # --- constructors ---

    @classmethod
    def zero(cls) -> SignedLog:
        return cls(0, LOG_ZERO)

    @classmethod
    def one(cls) -> SignedLog:
        return cls(1, 0.0)

    @classmethod
    def exp(cls, log_value: float) -> SignedLog:
        """Positive number e^{log_value}."""
        return cls(1, log_value)

    @classmethod
    def from_float(cls, value: float) -> SignedLog:
        if math.isnan(value) or math.isinf(value):
            raise ValueError(f"cannot represent {value!r}")
        if value == 0:
            return cls.zero()
        return cls(1 if value > 0 else -1, math.log(abs(value)))

    # --- conversions ---

    @property
    def is_zero(self) -> bool:
        return self.sign == 0

    def to_float(self) -> float:
        """Float value; saturates to ±inf above the double range."""
        if self.sign == 0:
            return 0.0
        try:
            return self.sign * math.exp(self.log_mag)
        except OverflowError:
            return self.sign * math.inf

    def __float__(self) -> float:
        return self.to_float()

    def log(self) -> float:
        """Natural log of a positive value."""
        if self.sign <= 0:
            raise ValueError("log of a non-positive SignedLog")
        return self.log_mag

    def __repr__(self) -> str:
        if self.sign == 0:
            return "SignedLog(0)"
        return f"SignedLog({'+' if self.sign > 0 else '-'}, {self.log_mag!r})"

    # --- arithmetic ---

    def __neg__(self) -> SignedLog:
        return SignedLog(-self.sign, self.log_mag)

    def __abs__(self) -> SignedLog:
        return SignedLog(abs(self.sign), self.log_mag)

    def __mul__(self, other: Number) -> SignedLog:
        other = _coerce(other)
        if self.sign == 0 or other.sign == 0:
            return SignedLog.zero()
        return SignedLog(self.sign * other.sign, self.log_mag + other.log_mag)

    __rmul__ = __mul__

    def __truediv__(self, other: Number) -> SignedLog:
        other = _coerce(other)
        if other.sign == 0:
            raise ZeroDivisionError("SignedLog division by zero")
        if self.sign == 0:
            return SignedLog.zero()
        return SignedLog(self.sign * other.sign, self.log_mag - other.log_mag)

    def __rtruediv__(self, other: Number) -> SignedLog:
        return _coerce(other) / self

    def __pow__(self, exponent: float) -> SignedLog:
        if self.sign < 0:
            raise ValueError("fractional power of a negative SignedLog")
        if self.sign == 0:
            if exponent <= 0:
                raise ZeroDivisionError("non-positive power of zero")
            return SignedLog.zero()
        return SignedLog(1, self.log_mag * exponent)

    def sqrt(self) -> SignedLog:
        return self**0.5

    def __add__(self, other: Number) -> SignedLog:
        other = _coerce(other)
        if self.sign == 0:
            return other
        if other.sign == 0:
            return self
        hi, lo = (self, other) if self.log_mag >= other.log_mag else (other, self)
        gap = lo.log_mag - hi.log_mag
        if hi.sign == lo.sign:
            return SignedLog(hi.sign, hi.log_mag + math.log1p(math.exp(gap)))
        if -gap < CANCELLATION_GAP:
            return _cancel_precise(hi, lo)
        return SignedLog(hi.sign, hi.log_mag + math.log(-math.expm1(gap)))

    __radd__ = __add__

    def __sub__(self, other: Number) -> SignedLog:
        return self + (-_coerce(other))

    def __rsub__(self, other: Number) -> SignedLog:
        return _coerce(other) + (-self)

    # --- ordering ---

    def _order_key(self):
        if self.sign > 0:
            return (1, self.log_mag)
        if self.sign < 0:
            return (-1, -self.log_mag)
        return (0, 0.0)

    def __lt__(self, other: Number) -> bool:
        return self._order_key() < _coerce(other)._order_key()


def _coerce(value: Number) -> SignedLog:
    if isinstance(value, SignedLog):
        return value
    if isinstance(value, (int, float)):
        return SignedLog.from_float(float(value))
    raise TypeError(f"cannot combine SignedLog with {type(value).__name__}")


def _cancel_precise(hi: SignedLog, lo: SignedLog) -> SignedLog:
    """hi + lo for opposite signs and nearly equal magnitudes."""
    with mpmath.workdps(HIGH_PRECISION_DPS):
        gap = mpmath.mpf(lo.log_mag) - mpmath.mpf(hi.log_mag)
        if gap == 0:
            return SignedLog.zero()
        log_mag = mpmath.mpf(hi.log_mag) + mpmath.log(-mpmath.expm1(gap))
        return SignedLog(hi.sign, float(log_mag))


def signed_sum(values: Iterable[Number]) -> SignedLog:
    """Sum many SignedLog values with one log-sum per sign."""
    positives: List[float] = []
    negatives: List[float] = []
    for value in values:
        value = _coerce(value)
        if value.sign > 0:
            positives.append(value.log_mag)
        elif value.sign < 0:
            negatives.append(value.log_mag)
    total = SignedLog.zero()
    if positives:
        total = SignedLog.exp(logsumexp(positives))
    if negatives:
        total = total - SignedLog.exp(logsumexp(negatives))
    return total


def relative_gap(a: Number, b: Number) -> float:
    """|a − b| / max(|a|, |b|) as a float; 0 when both vanish."""
    a, b = _coerce(a), _coerce(b)
    if a.sign == 0 and b.sign == 0:
        return 0.0
    diff = a - b
    if diff.sign == 0:
        return 0.0
    scale = max(a.log_mag, b.log_mag)
    return math.exp(min(diff.log_mag - scale, 700.0))
