"""Exception hierarchy shared by all voidgap modules."""


class VoidGapError(Exception):
    """Base class for every error raised by voidgap."""


# geometry
class BadShape(VoidGapError, ValueError):
    pass


class BadScale(VoidGapError, ValueError):
    pass


class VoidEscapesCell(VoidGapError, ValueError):
    pass


class DegenerateMesh(VoidGapError, ValueError):
    pass


# cross-section modes
class ResolutionTooCoarse(VoidGapError, ValueError):
    pass


class PointOutsideDomain(VoidGapError, ValueError):
    pass


class SolverFailure(VoidGapError, RuntimeError):
    pass


# virtual mass
class IllConditioned(VoidGapError, RuntimeError):
    pass


class MeshTooCoarse(VoidGapError, ValueError):
    pass


class UnsupportedShape(VoidGapError, ValueError):
    pass


# asymptotics
class PreconditionViolated(VoidGapError, ValueError):
    pass


class EtaAtCrossing(VoidGapError, ValueError):
    """Raised when the simple-eigenvalue correction is requested at eta = pi."""


class GapNotPredicted(VoidGapError):
    """The coupling |F1| is too small for the leading-order asymptotics to
    decide whether a gap opens."""


# cell oracle
class GeometryUnresolved(VoidGapError, ValueError):
    pass


class InsufficientPoints(VoidGapError, ValueError):
    pass


# cli
class ConfigParse(VoidGapError, ValueError):
    pass
