"""Exception hierarchy used across the package."""


class ChronoError(Exception):
    """Base class for all errors raised by chronoml."""


class DataError(ChronoError, ValueError):
    """Invalid or inconsistent input data."""


class ParseError(DataError):
    """A dataset file could not be parsed."""

    def __init__(self, message, row=None):
        self.row = row
        if row is not None:
            message = f"row {row}: {message}"
        super().__init__(message)


class SchemaError(DataError):
    """Dataset metadata and contents disagree."""


class OrderingError(DataError):
    """Timestamps within a series are not strictly increasing on a regular grid."""


class InsufficientLengthError(DataError):
    """A series is too short for the requested operation."""

    def __init__(self, message, series_id=None):
        self.series_id = series_id
        super().__init__(message)


class UndefinedScaleError(ChronoError, ArithmeticError):
    """The MASE scale (in-sample seasonal naive error) is zero or undefined."""


class NumericalFailure(ChronoError, ArithmeticError):
    """A model produced non-finite values or a singular system."""


class NotFittedError(ChronoError, AttributeError):
    """An estimator was used before ``fit``."""


class TrialTimeout(ChronoError):
    """Raised cooperatively when a trial runs past its deadline."""


class SpaceError(ChronoError, ValueError):
    """Invalid configuration space or configuration."""
