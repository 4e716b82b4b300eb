"""Transfer-operator eigen-data and zero-temperature selection for the
two-slope potential on the full 3-shift."""

from .closedform import eigen_triple, limit_targets, solve_pressure
from .errors import (
    BracketError,
    ConvergenceError,
    InvalidParamsError,
    NumericalError,
    SingularSystemError,
    ZtselectError,
)
from .ergopt import maximizing_value, solve_V, verify_calibration
from .gibbs import gibbs_masses, selection_record, selection_report
from .ringspace import Params, Ring, Word
from .signedlog import SignedLog
from .xferop import build_operator, leading_pair_power

try:
    from ._version import version as __version__
except Exception:
    try:
        from setuptools_scm import get_version

        __version__ = get_version(root="..", relative_to=__file__)
    except Exception:
        __version__ = "0.0.0"

__all__ = [
    "Params",
    "Ring",
    "Word",
    "SignedLog",
    "build_operator",
    "leading_pair_power",
    "solve_pressure",
    "eigen_triple",
    "limit_targets",
    "maximizing_value",
    "solve_V",
    "verify_calibration",
    "gibbs_masses",
    "selection_record",
    "selection_report",
    "ZtselectError",
    "InvalidParamsError",
    "NumericalError",
    "BracketError",
    "ConvergenceError",
    "SingularSystemError",
]
