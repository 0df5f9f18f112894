"""Exception hierarchy shared by all modules."""


class SLEError(Exception):
    """Base class for every error raised by this package."""


class DomainError(SLEError, ValueError):
    """An argument lies outside the admissible parameter domain."""


class ChargeConventionError(SLEError):
    """Charge assignment fails to reproduce the conformal dimension at u."""


class ContourGeometryError(SLEError):
    """A contour cannot be placed with the requested clearance."""


class ConvergenceError(SLEError):
    """Quadrature did not reach the requested tolerance.

    The best available estimate is kept on ``best`` (an ``IntegralResult``).
    """

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


class SingularInputError(SLEError, ValueError):
    """Two variables of a master function coincide."""


class UnsupportedConfigurationError(SLEError):
    """The requested combination of inputs is not supported."""


class StencilError(SLEError):
    """A finite-difference footprint leaves the open chamber."""


class StepFailure(SLEError):
    """A Loewner step kept violating the ordering after all halvings."""
