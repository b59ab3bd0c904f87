"""Exception types shared across the package."""

from __future__ import annotations


class IhocError(Exception):
    """Base class for all errors raised by :mod:`ihoc`."""


class QuadratureError(IhocError):
    """Raised when an integral cannot be evaluated to the requested accuracy.

    ``partial`` holds the best :class:`~ihoc.quadrature.QuadratureResult`
    available at the moment of failure, or ``None``.
    """

    def __init__(self, message: str, partial=None, t: float | None = None):
        super().__init__(message)
        self.partial = partial
        self.t = t


class NonFinite(QuadratureError):
    """The integrand returned NaN or an infinity inside the domain."""


class BudgetExceeded(QuadratureError):
    """The evaluation cap was reached before the tolerance was met."""


class Divergent(QuadratureError):
    """The improper integral does not settle as the horizon grows."""


class BlowUp(IhocError):
    """The state norm crossed the blow-up cap during integration.

    Attributes
    ----------
    t : float
        Time at which the cap was crossed.
    trajectory :
        The partial trajectory up to ``t`` (may be ``None``).
    """

    def __init__(self, message: str, t: float, trajectory=None):
        super().__init__(message)
        self.t = t
        self.trajectory = trajectory


class MissingDerivative(IhocError, ValueError):
    pass


class DimensionMismatch(IhocError, ValueError):
    pass


class BadParams(IhocError, ValueError):
    pass


class ConfigError(IhocError, ValueError):
    pass
