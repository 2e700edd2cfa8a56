"""Exception types raised across the package."""


class SemiotError(Exception):
    """Base class for every error raised by semiot."""


class DimensionError(SemiotError, ValueError):
    """Arrays with incompatible dimensions were combined."""


class DatasetError(SemiotError, ValueError):
    """A dataset file could not be parsed.

    ``offset`` is the 1-based line number for CSV files and the byte offset
    for IDX files; ``None`` when the problem is not tied to a location.
    """

    def __init__(self, message, offset=None):
        super().__init__(message)
        self.offset = offset


class NumericalError(SemiotError, FloatingPointError):
    """A non-finite value appeared during optimization."""

    def __init__(self, message, step=None, index=None):
        super().__init__(message)
        self.step = step
        self.index = index


class DivergenceError(NumericalError):
    """Deterministic ascent kept decreasing the objective."""


class CheckpointError(SemiotError, ValueError):
    """A checkpoint file is corrupt or has an unsupported version."""


class ConfigError(SemiotError, ValueError):
    """A configuration is invalid or contains unknown keys."""
