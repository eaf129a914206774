"""Exception hierarchy shared by all modules."""


class FlatRenormError(Exception):
    """Base class for every error raised by this package."""


class DomainError(FlatRenormError, ValueError):
    """An argument lies outside the domain of the operation."""


class DegenerateInterval(DomainError):
    """A zoom interval is empty or narrower than the working tolerance."""


class DerivativeSingularity(FlatRenormError, ArithmeticError):
    """A derivative vanishes or is infinite where a positive value is required."""


class ConvergenceError(FlatRenormError):
    """An iterative solver ran out of iterations."""


class PrecisionExhausted(FlatRenormError):
    """The working precision is too small for the requested computation."""


class NotRenormalizable(FlatRenormError):
    """The map violates 0 < x2 < x3."""


class BracketError(FlatRenormError):
    """A tuning bracket does not straddle the Fibonacci parameter."""


class IllConditionedBasis(FlatRenormError):
    """The eigenbasis is numerically singular."""


class NotApplicable(FlatRenormError):
    """The requested estimate is undefined for these exponents."""


class ExponentDegeneracy(DomainError):
    """S5 cannot be inverted because the right exponent equals one."""
