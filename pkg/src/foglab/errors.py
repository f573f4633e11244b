"""Exception types shared across the package.

Argument/precondition violations raise plain ValueError; the classes here
cover failures that depend on the data itself, so callers (and the CLI) can
tell "bad input values" apart from "this data cannot support an estimate".
"""


class DataError(Exception):
    """Base class for data-dependent failures."""


class MapFormatError(DataError):
    """A serialized file does not match its documented format."""

    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class NotEnoughDataError(DataError):
    """Too few observations to attempt an estimate."""


class DegenerateDataError(DataError):
    """Observations are numerous enough but cannot identify the parameters."""


class NumericError(DataError):
    """Non-finite values encountered where finite ones are required."""
