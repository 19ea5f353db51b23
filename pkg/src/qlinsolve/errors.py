"""Exception hierarchy shared by all modules."""


class QLinSolveError(Exception):
    """Base class for library errors."""


class InvalidInputError(QLinSolveError, ValueError):
    """Arguments violate a documented precondition."""


class ResourceLimitError(QLinSolveError):
    """Problem exceeds the desk-scale limits of the simulator."""


class ConditioningError(QLinSolveError):
    """No admissible kappa separates the smallest singular value from 1/kappa."""

    def __init__(self, message, sigma_min=None):
        super().__init__(message)
        self.sigma_min = sigma_min


class PostSelectionError(QLinSolveError):
    """Post-selected outcome has (numerically) zero probability."""

    def __init__(self, message, probability=0.0):
        super().__init__(message)
        self.probability = probability


class NonConvergenceError(QLinSolveError):
    """An iterative solver stopped above its tolerance."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class ConversionError(QLinSolveError):
    """Phase-convention conversion failed its operator identity check."""


class FitError(QLinSolveError):
    """Curve fit could not be carried out."""


class StabilityError(QLinSolveError):
    """Explicit time integration blew up."""
