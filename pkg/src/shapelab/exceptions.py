"""Exception types raised by shapelab."""


class ShapelabError(Exception):
    """Base class for all shapelab errors."""


class InvalidDimensionError(ShapelabError, ValueError):
    pass


class DomainError(ShapelabError, ValueError):
    """A scalar argument lies outside the domain of the operation."""


class FlatHullError(ShapelabError, ValueError):
    """Hull input is affinely degenerate.

    The affine rank of the point cloud is kept on ``rank`` so callers can
    tell a collinear cloud from a coincident one.
    """

    def __init__(self, rank, dimension):
        self.rank = int(rank)
        self.dimension = int(dimension)
        super().__init__(
            f"points span an affine subspace of rank {self.rank} < {self.dimension}"
        )


class OracleError(ShapelabError, RuntimeError):
    """A volume oracle returned values inconsistent with its own volumes."""


class InfeasiblePackingError(ShapelabError, ValueError):
    pass


class EnvelopeError(ShapelabError, RuntimeError):
    """Rejection sampler acceptance rate fell below the floor."""


class DegenerateSampleError(ShapelabError, ValueError):
    pass


class RankDeficiencyError(ShapelabError, ValueError):
    def __init__(self, rank, dimension):
        self.rank = int(rank)
        self.dimension = int(dimension)
        super().__init__(f"covariance has rank {self.rank} < {self.dimension}")


class OutOfRegimeError(ShapelabError, ValueError):
    """Inputs violate the regime condition under which a bound is valid."""


class NoRootError(ShapelabError, ValueError):
    pass


class InsufficientDataError(ShapelabError, ValueError):
    pass


class InvalidFamilyError(ShapelabError, ValueError):
    pass


class ConstructionError(ShapelabError, ValueError):
    """A lower-bound instance could not be built with the requested parameters."""


class UsageError(ShapelabError, ValueError):
    pass


class ExperimentError(ShapelabError):
    """A module error raised while running a configured experiment."""
