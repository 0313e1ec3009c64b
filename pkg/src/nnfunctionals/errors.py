"""Exception types shared across the package."""


class EstimationError(Exception):
    """Base class for failures raised while computing an estimate."""


class SampleError(EstimationError, ValueError):
    """A sample has the wrong shape, non-finite entries or too few points."""


class CoincidentPointsError(SampleError):
    """Two points coincide, so a nearest-neighbour distance would be zero."""


class DomainError(EstimationError, ValueError):
    """An argument lies outside the domain of a functional or Gamma factor."""


class WeightInfeasibleError(EstimationError, ValueError):
    """The linear constraints defining a weight class cannot be satisfied."""
