"""Exception types raised across the package."""


class LowRankBipError(ValueError):
    """Base class for input and validation errors."""


class NotSymmetric(LowRankBipError):
    pass


class IndefiniteInput(LowRankBipError):
    pass


class SingularBase(LowRankBipError):
    """The reference covariance is not positive definite."""


class DeltaOutOfRange(LowRankBipError):
    """A perturbation coefficient is <= -1."""


class RhoOutOfRange(LowRankBipError):
    pass


class DimensionMismatch(LowRankBipError):
    pass


class IndexOutOfRange(LowRankBipError):
    pass


class RankOutOfRange(LowRankBipError):
    pass


class NotPositive(LowRankBipError):
    """A covariance update leaves the positive definite cone."""


class ParseError(LowRankBipError):
    pass


class ValidationError(LowRankBipError):
    def __init__(self, field, message):
        self.field = field
        super().__init__(f"{field}: {message}")


class NonConvergence(RuntimeError):
    """No optimizer restart reached the gradient tolerance."""
