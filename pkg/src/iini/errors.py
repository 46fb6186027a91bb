"""Exception hierarchy shared by every stage of the interpolation pipeline."""


class IINIError(Exception):
    """Base class for all errors raised by this package."""


class DegenerateExtent(IINIError):
    pass


class GridTooLarge(IINIError):
    pass


class DegenerateRange(IINIError):
    pass


class IsolatedPixel(IINIError):
    pass


class RoleViolation(IINIError):
    pass


class ShapeError(IINIError):
    pass


class NothingToInfer(IINIError):
    pass


class DegenerateCircularMean(IINIError):
    pass


class UnconstrainedSegment(IINIError):
    pass


class SolverFailure(IINIError):
    pass


class TooLarge(IINIError):
    pass


class ConfigError(IINIError):
    pass
