"""Exception hierarchy.

Every error raised on purpose by the package derives from :class:`UCVError`,
which lets the CLI map them onto exit codes in one place.
"""


class UCVError(ValueError):
    """Base class for all package errors."""


class DimensionMismatch(UCVError):
    pass


class NotUniformlyConvex(UCVError):
    pass


class DomainError(UCVError):
    pass


class ZeroVector(UCVError):
    pass


class ZeroSum(UCVError):
    pass


class PointOutsideWorld(UCVError):
    pass


class UnboundedWorld(UCVError):
    pass


class AnchorOnOtherSite(UCVError):
    pass


class ResolutionMismatch(UCVError):
    pass


class EpsilonTooLarge(UCVError):
    pass


class EtaZero(UCVError):
    pass


class SitesTouchBoundary(UCVError):
    pass


class EpsilonExceedsBoundaryBound(UCVError):
    pass


class PreconditionViolated(UCVError):
    pass


class UnknownScenario(UCVError):
    pass


class DirectionNotInThetaP(UCVError):
    pass


class NotTwoDimensional(UCVError):
    pass


class SchemaError(UCVError):
    """Invalid scene document. ``path`` is a JSON pointer into the input."""

    def __init__(self, path: str, reason: str):
        super().__init__(f"{path}: {reason}")
        self.path = path
        self.reason = reason
