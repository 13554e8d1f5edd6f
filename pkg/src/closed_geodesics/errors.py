"""Exception hierarchy shared by the numerical and symbolic layers."""


class ClosedGeodesicError(Exception):
    """Base class for every error raised by this package."""


class DomainError(ClosedGeodesicError, ValueError):
    """A point lies outside the coordinate range of its chart."""


class ModelDefinitionError(ClosedGeodesicError):
    """A metric failed to be symmetric positive definite."""


class UnsupportedDimensionError(ClosedGeodesicError):
    pass


class CatalogError(ClosedGeodesicError, KeyError):
    """Unknown model, chart or seed name."""

    def __str__(self):
        return str(self.args[0]) if self.args else ""


class DiscretizationError(ClosedGeodesicError):
    """A loop segment is too long for the chart; refine the loop."""


class ResourceError(ClosedGeodesicError):
    """A requested iterate exceeds the configured point budget."""


class CollapseError(ClosedGeodesicError):
    """Energy descent is collapsing the loop toward a constant loop."""

    def __init__(self, message, loop=None):
        super().__init__(message)
        self.loop = loop


class DegenerateRefinementError(ClosedGeodesicError):
    """The gauge-fixed Hessian stayed singular after regularization."""

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


class BasinError(ClosedGeodesicError):
    """Newton iteration diverged: the seed is outside the basin."""

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


class GaugeDetectionError(ClosedGeodesicError):
    """The reparametrization direction was not found in the numerical kernel."""


class UnstableIndexError(ClosedGeodesicError):
    """Index or nullity changed between the two resolutions."""


class InsufficientDataError(ClosedGeodesicError, ValueError):
    pass


class MalformedHypothesisError(ClosedGeodesicError, ValueError):
    """A spectrum hypothesis violates the Bott iteration inequalities."""


class PreconditionError(ClosedGeodesicError):
    """The non-nilpotency window check failed at some iterate."""

    def __init__(self, message, m=None):
        super().__init__(message)
        self.m = m


class InsufficientHorizonError(ClosedGeodesicError):
    """Too few iterates to pin down the degree of the class."""
