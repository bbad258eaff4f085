"""Exception types shared across the package."""

from __future__ import annotations


class RobustAmcError(Exception):
    """Base class for all package-specific errors."""


class InputShapeError(RobustAmcError, ValueError):
    """An array argument has the wrong shape, length or value range."""


class UnsupportedOperationError(RobustAmcError, TypeError):
    """The requested operation does not apply to this modulation class or mode."""


class ConfigurationError(RobustAmcError, ValueError):
    """A configuration value violates its declared constraints."""


class DatasetFormatError(RobustAmcError, ValueError):
    """A dataset or artifact file is malformed.

    Carries the byte offset at which parsing failed.
    """

    def __init__(self, message: str, offset: int | None = None):
        self.offset = offset
        if offset is not None:
            message = f"{message} (at byte offset {offset})"
        super().__init__(message)


class TrainingDivergedError(RobustAmcError, RuntimeError):
    """Training hit a non-finite loss.

    ``last_state`` holds the most recent finite checkpoint (flat parameter
    vector) so callers can salvage it.
    """

    def __init__(self, message: str, last_state=None, step: int | None = None):
        self.last_state = last_state
        self.step = step
        super().__init__(message)


class GridMismatchError(RobustAmcError, RuntimeError):
    """A resume was requested against outputs produced by a different config."""
