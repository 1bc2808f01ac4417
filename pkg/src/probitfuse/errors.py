"""Exception hierarchy shared across the package."""


class ProbitFuseError(Exception):
    """Base class for every error raised by this package."""


class DomainError(ProbitFuseError, ValueError):
    """An argument violates a documented precondition."""


class FactorizationError(ProbitFuseError):
    """A matrix factorization failed (input not positive definite)."""


class CalibrationError(ProbitFuseError):
    """Confusion or correlation estimation is impossible on the given data."""


class DegenerateTableError(CalibrationError):
    """A 2x2 contingency table carries no usable information."""


class ParseError(ProbitFuseError):
    """A data file violates its format contract.

    ``row`` is the 1-based line number of the offending input line (header
    line included), or None when the problem is file-level.
    """

    def __init__(self, message: str, row: int | None = None):
        if row is not None:
            message = f"row {row}: {message}"
        super().__init__(message)
        self.row = row


class ConfigError(ProbitFuseError):
    """A configuration file or configured value is invalid."""
