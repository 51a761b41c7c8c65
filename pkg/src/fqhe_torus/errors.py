"""Exception hierarchy shared by all modules."""


class FQHEError(Exception):
    """Base class for every error raised by this package."""


class ValidationError(FQHEError, ValueError):
    """Inputs violate a structural precondition (CLI exit code 2)."""


class NumericalError(FQHEError, ArithmeticError):
    """A numerical method could not meet its contract (CLI exit code 1)."""


class NonconvergentDomain(ValidationError):
    """The theta series does not converge (Im(tau) <= 0 or Im(Omega) not positive definite)."""


class ToleranceUnachievable(NumericalError):
    """The certified truncation bound cannot reach the tolerance within the term cap."""


class GridTooLarge(NumericalError):
    """The quadrature grid exceeds the configured evaluation cap."""


class GridTooCoarse(NumericalError):
    """Finite differences at step h and 2h disagree beyond tolerance."""


class DegenerateSampling(NumericalError):
    """Too few sample points survived the exclusion rule."""


class NotSymmetric(ValidationError):
    pass


class NotPositiveDefinite(ValidationError):
    pass


class MixedParityDiagonal(ValidationError):
    pass


class NoUniformD(ValidationError):
    """K n is not a constant multiple of the all-ones vector."""


class NonpositiveU(ValidationError):
    pass


class NegativeEntry(ValidationError):
    """K has a negative entry (exponents of the pair factors must be nonnegative)."""
