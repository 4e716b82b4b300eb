"""Exception types raised by ztselect."""

from __future__ import annotations

from typing import Optional


class ZtselectError(Exception):
    """Base class for every error raised by the package."""

    pass


class InvalidParamsError(ZtselectError, ValueError):
    """Parameters, words, rings or run settings outside their valid range."""

    pass


class NumericalError(ZtselectError):
    """A computation could not produce a trustworthy number."""

    pass


class BracketError(NumericalError):
    """The secular function does not change sign on the search bracket."""

    def __init__(self, message: str, low_value: float, high_value: float):
        super().__init__(message)
        self.low_value = low_value
        self.high_value = high_value


class ConvergenceError(NumericalError):
    """An iterative solver ran out of iterations or was used outside its range."""

    def __init__(self, message: str, iterations: Optional[int] = None):
        super().__init__(message)
        self.iterations = iterations


class SingularSystemError(NumericalError):
    """A back-substituted vector does not solve the eigen-equations."""

    def __init__(self, message: str, residual: float):
        super().__init__(message)
        self.residual = residual
