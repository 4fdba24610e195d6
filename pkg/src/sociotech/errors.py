"""Exception hierarchy shared by every subsystem."""


class SociotechError(Exception):
    """Base class for all package errors."""


# time series
class MalformedRow(SociotechError, ValueError):
    pass


class NonMonotonicTime(SociotechError, ValueError):
    pass


class TooFewPoints(SociotechError, ValueError):
    pass


class NonPositiveValue(SociotechError, ValueError):
    pass


# dynamics and fitting
class NonFiniteInput(SociotechError, ValueError):
    pass


class ConfigInvalid(SociotechError, ValueError):
    pass


class BeyondSingularity(SociotechError, ValueError):
    """Raised when a hyperbolic law is evaluated at or past its pole."""


class NoConvergence(SociotechError, RuntimeError):
    def __init__(self, message, result=None):
        super().__init__(message)
        self.result = result


class DegenerateData(SociotechError, ValueError):
    pass


class InfeasibleStages(SociotechError, ValueError):
    pass


# medium and stigmergy
class InvalidRate(SociotechError, ValueError):
    pass


class BrokenPath(SociotechError, ValueError):
    pass


class DeadEnd(SociotechError, RuntimeError):
    pass


class Unreachable(SociotechError, ValueError):
    pass


class EmptyArticle(SociotechError, ValueError):
    pass


class BadIndex(SociotechError, IndexError):
    pass
