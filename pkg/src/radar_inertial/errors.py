class RioError(Exception):
    """Base class for all errors raised by this package."""

    exit_code = 2


class NonMonotonicTime(RioError):
    pass


class ExcessiveGap(RioError):
    pass


class InsufficientTargets(RioError):
    pass


class DegenerateGeometry(RioError):
    pass


class NotStationary(RioError):
    pass


class OutOfRange(RioError):
    pass


class ParseError(RioError):
    pass


class BadDirection(ParseError):
    pass


class NoOverlap(RioError):
    pass


class InsufficientMotion(RioError):
    pass


class ConfigError(RioError):
    exit_code = 1


class SolverDiverged(RioError):
    exit_code = 3


class NoConvergence(RioError):
    exit_code = 3
