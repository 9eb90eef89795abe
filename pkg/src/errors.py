"""
Exception hierarchy for the toolkit.

Each error carries the exit code the CLI reports for it; library code only raises,
the CLI decides how to exit.
"""
from typing import Optional


class DbcError(Exception):
    """Base class for every error raised by the toolkit."""
    exit_code: int = 1


class ShapeError(DbcError, ValueError):
    """Array dimensions do not line up."""


class StateError(DbcError, RuntimeError):
    """An operation was called out of order (e.g. backward before forward)."""


class UsageError(DbcError, RuntimeError):
    """A model was used against its contract (e.g. a trainable guide)."""


class RangeError(DbcError, IndexError):
    """An index fell outside its documented range."""


class NumericalError(DbcError, FloatingPointError):
    """A loss or parameter became NaN or infinite."""


class DataQualityError(DbcError):
    """Collected demonstrations are unusable."""


class ConfigError(DbcError, ValueError):
    exit_code = 2


class FormatError(DbcError, ValueError):
    """A file on disk is malformed. `offset` is the byte position of the problem."""
    exit_code = 3

    def __init__(self, message: str, offset: Optional[int] = None):
        self.offset = offset
        if offset is not None:
            message = f"{message} (at byte offset {offset})"
        super().__init__(message)


class DependencyError(DbcError, FileNotFoundError):
    """An upstream artifact a stage needs is missing."""
    exit_code = 4

    def __init__(self, path: str, stage: Optional[str] = None):
        self.path = str(path)
        hint = f" (run `{stage}` first)" if stage else ""
        super().__init__(f"Missing upstream artifact: {self.path}{hint}")
