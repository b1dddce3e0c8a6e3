"""Exception types raised across the package."""


class UnderwriteError(Exception):
    """Base class for package errors."""


class DimensionError(UnderwriteError, ValueError):
    pass


class ShapeError(UnderwriteError, ValueError):
    pass


class ConfigError(UnderwriteError, ValueError):
    """Invalid experiment configuration; ``key`` names the offending field when known."""

    def __init__(self, message, key=None):
        super().__init__(message)
        self.key = key


class NumericalError(UnderwriteError, ArithmeticError):
    """A matrix that must be SPD could not be factorized, even with jitter."""


class ConvergenceError(UnderwriteError, ArithmeticError):
    """Newton iteration hit its cap before the gradient tolerance was met."""

    def __init__(self, message, iterate=None, grad_norm=None):
        super().__init__(message)
        self.iterate = iterate
        self.grad_norm = grad_norm


class SimulationError(UnderwriteError, RuntimeError):
    """A numerical failure inside an episode, annotated with where it happened."""

    def __init__(self, message, replication=None, step=None, context=None):
        super().__init__(message)
        self.replication = replication
        self.step = step
        self.context = context


class CsvFormatError(UnderwriteError, ValueError):
    pass
