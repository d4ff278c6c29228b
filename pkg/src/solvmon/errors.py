"""Exception hierarchy shared across the package.

The CLI maps these onto process exit codes: configuration problems exit 2,
data problems exit 3, numerical problems exit 4.
"""


class SolvmonError(Exception):
    """Base class for all package errors."""


class ConfigError(SolvmonError):
    """Invalid or inconsistent configuration (bad file, bad shock id, ...)."""


class DataError(SolvmonError):
    """Malformed or missing market data (unknown date, bad CSV row, ...)."""


class CalibrationError(DataError):
    """Input data too thin or degenerate to calibrate from."""


class DomainError(SolvmonError, ValueError):
    """Input outside the mathematical domain of an operation."""


class NumericalError(SolvmonError):
    """Numerical failure (negative variance, non-finite result, ...)."""


class FitError(NumericalError):
    """Least-squares fit failure, typically a rank-deficient design."""
