"""Exception types raised by the solver."""


class RabiSpecError(Exception):
    """Base class for all solver errors."""


class NoConvergence(RabiSpecError):
    pass


class PoleProximity(RabiSpecError, ValueError):
    """The spectral parameter sits inside an exclusion window around a pole."""


class GridOutsideDomain(RabiSpecError, ValueError):
    pass


class SingularPoint(RabiSpecError, ValueError):
    pass


class OutsideD0(RabiSpecError, ValueError):
    pass


class NoJointZero(RabiSpecError):
    """Re(G) vanishes but Im(G) does not: the zero is not a level."""


class NotFound(RabiSpecError):
    pass


class PathTooCloseToSingularity(RabiSpecError, ValueError):
    pass


class StepUnderflow(RabiSpecError):
    pass


class LevelNotConverged(RabiSpecError):
    pass


class NoConvergenceOfEigensolver(RabiSpecError):
    pass
