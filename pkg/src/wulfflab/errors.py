"""Exception taxonomy shared across the toolkit."""


class WulffLabError(Exception):
    """Base class for all toolkit errors."""


class NonUnitInput(WulffLabError):
    """Direction vector deviates from unit length beyond the accepted slack."""


class DerivativeFailure(WulffLabError):
    """Finite differences produced non-finite values."""


class ConvexityViolation(WulffLabError):
    """A_F = D^2F + F*I is not positive definite where it must be."""


class ZeroT(WulffLabError):
    """Translation/product parameter t must be nonzero."""


class RankDeficient(WulffLabError):
    """Chart Jacobian is rank deficient; the map is not an immersion there."""


class DegenerateTranslation(WulffLabError):
    """1 - t*lambda_i vanishes; the parallel translation degenerates."""


class ZeroCurvature(WulffLabError):
    """Focal construction requested for a zero principal curvature."""


class LeafDrift(WulffLabError):
    """Leaf integration drifted off the focal fiber beyond tolerance."""


class NotIsoparametric(WulffLabError):
    """Curvature groups drift along a leaf beyond the isoparametric tolerance."""


class AntipodeNotFound(WulffLabError):
    """Gauss-map inversion on a focal leaf failed to converge."""


class GroupMismatch(WulffLabError):
    """Number of curvature groups varies across the sample grid."""


class ConfigError(WulffLabError):
    """Invalid CLI/run configuration."""


class OptimizationDivergenceWarning(UserWarning):
    """Dual-norm refinement failed to improve on the grid seed."""
