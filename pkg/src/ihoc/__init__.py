"""Numerical verification of optimality conditions for infinite-horizon control.

Problems live in weighted Sobolev spaces ``W^1_p(R_+; nu)``.  The package
certifies weight admissibility, computes adjoints (including the normal-form
representation), checks the necessary conditions and probes sufficient
concavity conditions.
"""

__version__ = "0.1.0"

from .errors import (BadParams, BlowUp, BudgetExceeded, ConfigError, DimensionMismatch, Divergent,
                     IhocError, MissingDerivative, NonFinite, QuadratureError)
from .verdicts import Condition, ConditionReport, Verdict

__all__ = [
    "__version__", "BadParams", "BlowUp", "BudgetExceeded", "ConfigError", "DimensionMismatch",
    "Divergent", "IhocError", "MissingDerivative", "NonFinite", "QuadratureError", "Condition",
    "ConditionReport", "Verdict",
]
