# aoi_priority/errors.py


class AoiError(Exception):
    """Base class for every error raised by aoi_priority."""


class InvalidRate(AoiError, ValueError):
    pass


class InvalidConfig(AoiError, ValueError):
    pass


class UnstableSystem(AoiError, ArithmeticError):
    """The stability margin mu1 - lambda1(1 + lambda2/mu2) is not positive."""


class NearBoundary(UnstableSystem):
    """
    Formally stable, but too close to the boundary for the closed forms:
    pi0 and the dominant eigenvalue lose all precision there.
    """


class OutOfDomain(AoiError, ArithmeticError):
    """A moment generating function was evaluated outside its convergence strip."""


class SingularDenominator(AoiError, ZeroDivisionError):
    pass


class SingularSystem(AoiError, ArithmeticError):
    pass
