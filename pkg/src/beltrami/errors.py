"""Exception hierarchy shared by all modules."""


class BeltramiError(Exception):
    """Base class for library errors."""


class ValidationError(BeltramiError, ValueError):
    """Malformed input: bad parameters, configs, tables or data."""


class DomainError(ValidationError):
    """A point lies outside the domain where an object is defined."""


class DegeneracyError(BeltramiError):
    """|mu| >= 1 at an evaluation point."""

    def __init__(self, message, location=None):
        super().__init__(message)
        self.location = location


class QuadratureError(BeltramiError):
    """A sampled integrand was not finite."""

    def __init__(self, message, location=None):
        super().__init__(message)
        self.location = location


class SolverError(BeltramiError):
    """An iterative solver diverged or ran out of iterations."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class TopologyError(ValidationError):
    """Domain has the wrong connectivity for the requested operation."""


class GeometryError(BeltramiError):
    """Mapped plates or curves degenerated on the grid."""


class CompositionError(BeltramiError):
    """An image point fell outside the domain of a map."""


class ContinuationError(BeltramiError):
    """A continuation path left the domain."""


class UnsupportedError(ValidationError):
    """Descriptor or option outside the built-in catalog."""


class PreconditionError(ValidationError):
    """A geometric precondition failed on the sampling lattice."""
