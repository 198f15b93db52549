"""Error taxonomy shared across the package.

Each class carries a distinct process exit code so scripted callers can
dispatch on the failure kind without parsing messages.
"""


class AuditError(Exception):
    """Base class for all errors raised by this package."""

    exit_code = 1


class ConfigurationError(AuditError):
    """Invalid configuration values, shapes, or input data."""

    exit_code = 2


class ShapeError(ConfigurationError):
    """Dimension mismatch between interacting arrays."""


class InsufficientDataError(ConfigurationError):
    """Too few examples for the requested computation."""


class CapacityError(AuditError):
    """Request exceeds a documented size cap (enumeration or exact-mode limits)."""

    exit_code = 3


class DivergenceError(AuditError):
    """Training produced a non-finite loss, gradient, or parameter vector."""

    exit_code = 4

    def __init__(self, message: str, iteration: int | None = None):
        super().__init__(message)
        self.iteration = iteration


class VerificationError(AuditError):
    """A formula check failed its tolerance."""

    exit_code = 5
