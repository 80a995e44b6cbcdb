"""Exception types shared across the package."""


class LoadGanError(Exception):
    """Base class for all package errors."""


class ShapeError(LoadGanError, ValueError):
    pass


class ConfigError(LoadGanError, ValueError):
    """Invalid configuration values or combinations."""


class EmptyPolytopeError(ConfigError):
    pass


class NonConvergenceError(LoadGanError, RuntimeError):
    """The QP solver hit its iteration cap without meeting tolerances.

    ``diagnostics`` holds the final residuals per batch element so they can be
    dumped to JSON for debugging.
    """

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class DataError(LoadGanError, ValueError):
    """Malformed or inconsistent meter data."""


class EmptyDatasetError(DataError):
    pass


class TrainingAborted(LoadGanError, RuntimeError):
    """Training stopped early; ``checkpoint`` holds the last good parameters."""

    def __init__(self, message, checkpoint=None, history=None):
        super().__init__(message)
        self.checkpoint = checkpoint
        self.history = history


class NonFiniteGradientError(LoadGanError, FloatingPointError):
    """A NaN or infinite gradient reached the optimizer."""


class DegenerateBatchError(ShapeError):
    pass
