"""Exception hierarchy shared by all modules."""


class ArtifactError(Exception):
    """Base class for every error raised by this package."""


class GeometryError(ArtifactError, ValueError):
    """Damper geometry is invalid (for instance plateau radius >= support radius)."""


class ResolutionError(ArtifactError, ValueError):
    """A sampling grid is too coarse to resolve a feature."""


class GridExtentError(ArtifactError):
    """A real-space grid is too short: the sampled tail carries visible mass."""


class IncompatibleGridError(ArtifactError, ValueError):
    """Two sampled objects live on grids that cannot be combined."""


class ConstructionFailed(ArtifactError):
    """A constrained construction did not reach its residual target."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class AccuracyError(ArtifactError):
    """A quadrature did not converge to the requested accuracy."""

    def __init__(self, message, estimate=None):
        super().__init__(message)
        self.estimate = estimate


class UnsupportedError(ArtifactError, NotImplementedError):
    """Requested input kind or dimension is not supported."""


class HermiticityError(ArtifactError, ValueError):
    """An operator that must be Hermitian is not."""


class ConsistencyError(ArtifactError):
    """Two independent constructions of the same object disagree."""


class UsageError(ArtifactError, ValueError):
    """Invalid configuration or command-line usage."""

    def __init__(self, message, field=None):
        if field:
            message = f"{field}: {message}"
        super().__init__(message)
        self.field = field
