"""Exception hierarchy.

``InputError`` subclasses map to CLI exit code 2, ``NumericalError``
subclasses to exit code 3.
"""


class SpdcScreenError(Exception):
    """Base class for all errors raised by this package."""


class InputError(SpdcScreenError, ValueError):
    """Bad or inconsistent input data."""


class CrystalFormatError(InputError):
    """A crystal record file could not be parsed."""


class CrystalValidationError(InputError):
    """A parsed crystal record violates an invariant.

    ``field`` names the offending field (dotted path into the record).
    """

    def __init__(self, field, message):
        super().__init__(f"{field}: {message}")
        self.field = field


class FrameMismatchError(InputError):
    """A tensor and a polarization basis are expressed in different frames."""


class ContractViolation(InputError):
    """An operation was called outside its precondition."""


class NumericalError(SpdcScreenError, ArithmeticError):
    """A numerical procedure failed to meet its tolerance."""


class NonPhysicalError(NumericalError):
    """Input describes a non-physical medium (e.g. non positive-definite epsilon)."""


class DispersionRangeError(NumericalError, ValueError):
    """Wavelength (or a derivative stencil) falls outside a model's valid range."""


class FitError(NumericalError):
    """A dispersion fit is underdetermined or does not reach its residual bound."""


class QuadratureError(NumericalError):
    """Adaptive quadrature did not converge; ``estimate`` holds the achieved value."""

    def __init__(self, message, estimate=None, error=None):
        super().__init__(message)
        self.estimate = estimate
        self.error = error


class GridError(NumericalError):
    """A sampling grid is too narrow for the requested quantity."""


class UnboundedBandwidthError(NumericalError):
    """Acceptance bandwidth is unbounded because the GVD vanishes."""


class NotPhaseMatchableError(SpdcScreenError):
    """No phase-matching direction exists for the requested configuration."""
