"""Symbolic substrate: words on {0, 1, 2}, the ring partition, the metric
and the two-slope potential family.

A ring is one of the sets [0ⁿ∗₀] (n zeros, then 1 or 2), [1ⁿ∗₁], [2], the
fixed points 0^∞ and 1^∞, or one of the two tail aggregates used by the
truncated operator. The potential is constant on every non-tail ring.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum, IntEnum
from typing import Iterator, List, NamedTuple, Sequence, Tuple, Union

from .errors import InvalidParamsError

MAX_WORD_LENGTH = 64


class Symbol(IntEnum):
    ZERO = 0
    ONE = 1
    TWO = 2


@dataclass(frozen=True)
class Word:
    """Finite prefix of a point of the full 3-shift."""

    symbols: Tuple[Symbol, ...] = ()

    def __post_init__(self):
        if len(self.symbols) > MAX_WORD_LENGTH:
            raise InvalidParamsError(
                f"word length {len(self.symbols)} exceeds {MAX_WORD_LENGTH}"
            )
        try:
            symbols = tuple(Symbol(int(s)) for s in self.symbols)
        except ValueError as exc:
            raise InvalidParamsError(f"invalid symbol in {self.symbols!r}") from exc
        object.__setattr__(self, "symbols", symbols)

    @classmethod
    def of(cls, *symbols: int) -> Word:
        return cls(tuple(symbols))

    @classmethod
    def parse(cls, text: str) -> Word:
        """Build a word from a digit string such as ``"0012"``."""
        return cls(tuple(int(ch) for ch in text.strip()))

    @classmethod
    def constant(cls, symbol: int, length: int) -> Word:
        return cls((symbol,) * length)

    def __len__(self) -> int:
        return len(self.symbols)

    def __iter__(self) -> Iterator[Symbol]:
        return iter(self.symbols)

    def __getitem__(self, index):
        return self.symbols[index]

    def __str__(self) -> str:
        return "".join(str(int(s)) for s in self.symbols)

    def prepend(self, symbol: int) -> Word:
        return Word((Symbol(symbol),) + self.symbols)

    def shift(self) -> Word:
        """Drop the first symbol."""
        return Word(self.symbols[1:])

    @property
    def is_constant(self) -> bool:
        return len(set(self.symbols)) <= 1


class RingKind(Enum):
    ZERO_RUN = "zero_run"
    ONE_RUN = "one_run"
    TWO_HEAD = "two_head"
    FIX0 = "fix0"
    FIX1 = "fix1"
    TAIL0 = "tail0"
    TAIL1 = "tail1"


_COUNTED_KINDS = {RingKind.ZERO_RUN, RingKind.ONE_RUN, RingKind.TAIL0, RingKind.TAIL1}


@dataclass(frozen=True)
class Ring:
    """Element of the ring partition. ``n`` is the run length, or the
    truncation depth N for the two tail aggregates."""

    kind: RingKind
    n: int = 0

    def __post_init__(self):
        if self.kind in _COUNTED_KINDS:
            if self.n < 1:
                raise InvalidParamsError(
                    f"{self.kind.value} needs n >= 1, got {self.n}"
                )
        elif self.n != 0:
            raise InvalidParamsError(f"{self.kind.value} carries no run length")

    @classmethod
    def zero_run(cls, n: int) -> Ring:
        return cls(RingKind.ZERO_RUN, n)

    @classmethod
    def one_run(cls, n: int) -> Ring:
        return cls(RingKind.ONE_RUN, n)

    @classmethod
    def run(cls, symbol: int, n: int) -> Ring:
        return cls.zero_run(n) if symbol == Symbol.ZERO else cls.one_run(n)

    @classmethod
    def two_head(cls) -> Ring:
        return cls(RingKind.TWO_HEAD)

    @classmethod
    def fix0(cls) -> Ring:
        return cls(RingKind.FIX0)

    @classmethod
    def fix1(cls) -> Ring:
        return cls(RingKind.FIX1)

    @classmethod
    def tail0(cls, depth: int) -> Ring:
        return cls(RingKind.TAIL0, depth)

    @classmethod
    def tail1(cls, depth: int) -> Ring:
        return cls(RingKind.TAIL1, depth)

    @property
    def is_tail(self) -> bool:
        return self.kind in (RingKind.TAIL0, RingKind.TAIL1)

    @property
    def is_fixed(self) -> bool:
        return self.kind in (RingKind.FIX0, RingKind.FIX1)

    @property
    def label(self) -> str:
        if self.kind is RingKind.ZERO_RUN:
            return f"0^{self.n}*0"
        if self.kind is RingKind.ONE_RUN:
            return f"1^{self.n}*1"
        if self.kind is RingKind.TWO_HEAD:
            return "[2]"
        if self.kind is RingKind.FIX0:
            return "0^inf"
        if self.kind is RingKind.FIX1:
            return "1^inf"
        if self.kind is RingKind.TAIL0:
            return f"tail0({self.n})"
        return f"tail1({self.n})"

    def __str__(self) -> str:
        return self.label


@dataclass(frozen=True)
class Params:
    """One problem instance: level ``alpha`` on [2], slope ``gamma_slope``
    at 1^∞ and inverse temperature ``beta``."""

    alpha: float
    gamma_slope: float = 3.0
    beta: float = 0.0

    def __post_init__(self):
        if not self.alpha > 0:
            raise InvalidParamsError(f"alpha must be > 0, got {self.alpha}")
        if not self.gamma_slope > 1:
            raise InvalidParamsError(
                f"gamma_slope must be > 1, got {self.gamma_slope}"
            )
        if not self.beta >= 0:
            raise InvalidParamsError(f"beta must be >= 0, got {self.beta}")
        for name in ("alpha", "gamma_slope", "beta"):
            object.__setattr__(self, name, float(getattr(self, name)))

    def at_beta(self, beta: float) -> Params:
        return Params(self.alpha, self.gamma_slope, beta)


class RingMatch(NamedTuple):
    ring: Ring
    unresolved: bool


class Distance(NamedTuple):
    value: float
    resolved: bool


class Branch(NamedTuple):
    """One preimage branch: prepended symbol, ring of the preimage, A there."""

    symbol: Symbol
    ring: Ring
    value: float


def ring_of(w: Word) -> RingMatch:
    """Classify a word into the ring partition.

    Constant words are prefixes of a fixed point as well as of every deeper
    run, so they come back as the run of their own length with
    ``unresolved`` set.
    """
    if len(w) == 0:
        raise InvalidParamsError("cannot classify the empty word")
    first = w[0]
    if first == Symbol.TWO:
        return RingMatch(Ring.two_head(), False)
    n = 1
    while n < len(w) and w[n] == first:
        n += 1
    return RingMatch(Ring.run(first, n), n == len(w))


def dist(x: Word, y: Word) -> Distance:
    """2^{-n} for the first index n where the words differ.

    Only the common prefix is compared; words that agree there give 0 with
    ``resolved`` False.
    """
    if len(x) == 0 or len(y) == 0:
        raise InvalidParamsError("dist needs nonempty words")
    for n, (a, b) in enumerate(zip(x, y)):
        if a != b:
            return Distance(2.0**-n, True)
    return Distance(0.0, False)


def dist_to_fixed(w: Word, symbol: int) -> float:
    """d(w, a^∞) for a ∈ {0, 1}; 0 when w is a prefix of a^∞."""
    return dist(w, Word.constant(symbol, len(w))).value


def potential(r: Ring, p: Params) -> float:
    """Value of A on a non-tail ring."""
    if r.kind is RingKind.ZERO_RUN:
        return -1.0 / 2.0**r.n
    if r.kind is RingKind.ONE_RUN:
        return -p.gamma_slope / 2.0**r.n
    if r.kind is RingKind.TWO_HEAD:
        return -p.alpha
    if r.is_fixed:
        return 0.0
    raise InvalidParamsError(f"potential is not constant on {r.label}")


def word_potential(w: Word, p: Params) -> float:
    """A on the cylinder [w]; the word must pin down its ring."""
    match = ring_of(w)
    if match.unresolved:
        raise InvalidParamsError(f"word {w} does not determine its ring")
    return potential(match.ring, p)


def preimage_rings(r: Ring, p: Params) -> List[Branch]:
    """The three branches x = a·y of the shift over a point y of ring r."""
    if r.is_tail:
        raise InvalidParamsError(f"preimages of {r.label} are owned by the operator")

    if r.kind is RingKind.ZERO_RUN:
        zero = Ring.zero_run(r.n + 1)
    elif r.kind is RingKind.FIX0:
        zero = r
    else:
        zero = Ring.zero_run(1)

    if r.kind is RingKind.ONE_RUN:
        one = Ring.one_run(r.n + 1)
    elif r.kind is RingKind.FIX1:
        one = r
    else:
        one = Ring.one_run(1)

    two = Ring.two_head()
    return [
        Branch(Symbol.ZERO, zero, potential(zero, p)),
        Branch(Symbol.ONE, one, potential(one, p)),
        Branch(Symbol.TWO, two, potential(two, p)),
    ]


def rings_to_depth(depth: int) -> List[Ring]:
    """All non-tail rings with run length at most ``depth``."""
    rings: List[Ring] = [Ring.fix0(), Ring.fix1(), Ring.two_head()]
    rings.extend(Ring.zero_run(n) for n in range(1, depth + 1))
    rings.extend(Ring.one_run(n) for n in range(1, depth + 1))
    return rings


def words_of_length(length: int) -> Iterator[Word]:
    """Every word of the given length, in lexicographic order."""
    if length == 0:
        yield Word()
        return
    for head in Symbol:
        for rest in words_of_length(length - 1):
            yield rest.prepend(head)


def as_word(value: Union[Word, str, Sequence[int]]) -> Word:
    if isinstance(value, Word):
        return value
    if isinstance(value, str):
        return Word.parse(value)
    return Word(tuple(value))
