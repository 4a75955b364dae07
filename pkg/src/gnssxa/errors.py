"""Exception types shared across the package."""


class GnssXaError(Exception):
    """Base class for every error raised by gnssxa."""


class DataError(GnssXaError):
    """Scenario data could not be read or violates the schema."""


class ParseError(DataError):
    pass


class SchemaError(DataError):
    pass


class InfeasibleGeometry(GnssXaError):
    """The scenario generator could not place the requested satellites."""


class DegenerateGeometry(GnssXaError):
    """Geometry matrix is rank deficient at the requested tolerance."""


class Infeasible(GnssXaError):
    """The requested attack cannot be synthesized for this geometry."""


class RankDeficient(Infeasible):
    pass


class SingularProjection(Infeasible):
    pass


class DimensionMismatch(GnssXaError, ValueError):
    pass


class LengthMismatch(DimensionMismatch):
    pass


class DomainError(GnssXaError, ValueError):
    pass


class EmptyHypothesis(GnssXaError):
    pass


class NotSPD(DomainError):
    """Covariance matrix is not symmetric positive definite."""
