"""Exception hierarchy shared by the numerical modules and the CLI."""


class KreinError(Exception):
    """Base class for all errors raised by this package."""


class DimensionError(KreinError, ValueError):
    """Array shapes do not match the Krein structure."""


class NotAGraphError(KreinError):
    """A subspace cannot be written as the graph of an operator over H+."""


class IllConditionedShiftError(KreinError):
    """The shifted block ``A22 - mu`` is singular or too ill-conditioned."""

    def __init__(self, message, *, mu=None, condition=None):
        super().__init__(message)
        self.mu = mu
        self.condition = condition


class PreconditionError(KreinError):
    """An operation was called on data that violates its precondition."""


class ConvergenceError(KreinError):
    """An iterative solver stopped before reaching its tolerance."""

    def __init__(self, message, *, residual=None, iterations=None):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


class DegenerateSelectionError(KreinError):
    """Eigenvalue selection cannot separate the upper spectral subspace."""


class SingularShiftError(KreinError):
    """``S - alpha`` is singular (alpha lies in the spectrum of S)."""
