"""Exception hierarchy shared by all modules."""


class HomIndexError(Exception):
    """Base class for every error raised by the package."""


class ParameterError(HomIndexError, ValueError):
    pass


class DimensionError(HomIndexError, ValueError):
    pass


class DomainError(HomIndexError, ValueError):
    """A spectral function is undefined or non-finite on the spectrum."""

    def __init__(self, message, eigenvalue=None):
        super().__init__(message)
        self.eigenvalue = eigenvalue


class SpectralError(HomIndexError, RuntimeError):
    """Eigensolver failure; carries the dimension and a condition estimate."""

    def __init__(self, message, dim=None, condition=None):
        super().__init__(message)
        self.dim = dim
        self.condition = condition


class ConfigurationError(HomIndexError, ValueError):
    pass


class DiscretizationError(HomIndexError, ValueError):
    pass


class ResourceError(HomIndexError, MemoryError):
    pass


class AccuracyError(HomIndexError, ArithmeticError):
    """A numerical procedure failed to reach its tolerance."""

    def __init__(self, message, estimate=None):
        super().__init__(message)
        self.estimate = estimate


class GuardError(HomIndexError, ArithmeticError):
    """A resolvent is singular or a convergence guard is violated."""


class DegenerateEndpointError(HomIndexError, ValueError):
    pass
