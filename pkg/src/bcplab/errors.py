"""Exception hierarchy shared by all bcplab modules."""


class BcpLabError(Exception):
    """Base class for every error raised by bcplab."""


# lp
class DimensionMismatch(BcpLabError, ValueError):
    pass


class NumericalFailure(BcpLabError, ArithmeticError):
    pass


class TooLarge(BcpLabError, ValueError):
    pass


# network
class InvalidTopology(BcpLabError, ValueError):
    """Raised when a topology fails validation and the caller asked for a hard failure."""


class NotStochastic(BcpLabError, ValueError):
    pass


class InfeasibleTraffic(BcpLabError):
    pass


class NotHeavyTraffic(BcpLabError):
    pass


class NonUniqueAllocation(BcpLabError):
    pass


# workload
class NoCanonicalConstruction(BcpLabError):
    pass


class InconsistentWorkload(BcpLabError):
    pass


class GNotNonnegative(BcpLabError):
    pass


class Assumption25Violated(BcpLabError):
    """Some column of G has no strictly positive entry."""


class NotInWorkloadSpace(BcpLabError, ValueError):
    pass


# primitives / policy / simulator
class NoExogenousArrivals(BcpLabError, IndexError):
    pass


class BadRanking(BcpLabError, ValueError):
    pass


class InfeasibleAllocation(BcpLabError):
    """A policy returned an allocation violating capacity or availability."""


class NegativeQueue(BcpLabError, AssertionError):
    pass


# scaling / cost / ewf
class GridOutOfRange(BcpLabError, ValueError):
    pass


class NotMonotone(BcpLabError):
    pass


class HorizonTooShort(BcpLabError):
    pass


class NotSupported(BcpLabError):
    pass


class BoundViolated(BcpLabError):
    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class ConfigError(BcpLabError, ValueError):
    pass
