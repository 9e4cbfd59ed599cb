"""Homozygosity of hierarchical Pitman-Yor processes: exact formulas and Monte Carlo checks."""

from .errors import BudgetError, ConsistencyError, HpypError, ParameterError, RangeError
from .params import Params, TruncationPolicy

__version__ = "0.1.0"

__all__ = [
    "BudgetError",
    "ConsistencyError",
    "HpypError",
    "ParameterError",
    "RangeError",
    "Params",
    "TruncationPolicy",
    "__version__",
]
