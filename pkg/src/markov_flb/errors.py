"""Exception hierarchy shared by every module of the package."""


class MarkovFLBError(Exception):
    """Base class for all package errors."""


class NotIrreducible(MarkovFLBError, ValueError):
    """Support graph of a nonnegative matrix is not strongly connected."""


class NotAperiodic(MarkovFLBError, ValueError):
    """Chain is irreducible but periodic."""


class NoConvergence(MarkovFLBError, RuntimeError):
    """Iteration budget exhausted before the stopping rule was met."""


class StepUnderflow(MarkovFLBError, RuntimeError):
    """Adaptive finite-difference step shrank below its floor."""


class SupportViolation(MarkovFLBError, ValueError):
    """A conditioner does not cover the support of the joint distribution."""


class DomainError(MarkovFLBError, ValueError):
    """Parameter outside the domain on which a quantity is defined."""


class AssumptionViolated(MarkovFLBError, ValueError):
    """Transition matrix does not meet the structural assumption required."""


class OutOfRange(MarkovFLBError, ValueError):
    """Rate or slope outside the invertible range of a measure family."""


class Degenerate(MarkovFLBError, ValueError):
    """Measure family has zero varentropy so inverse maps are undefined."""


class EnumerationTooLarge(MarkovFLBError, ValueError):
    """Exhaustive enumeration would exceed the configured state cap."""


class Vacuous(MarkovFLBError, ValueError):
    """Every candidate point of a bound failed its validity guard."""


class NotRegular(MarkovFLBError, ValueError):
    """Permutation family is not a group homomorphism of bijections."""


class UnknownPreset(MarkovFLBError, KeyError):
    """Requested preset name is not registered."""


class InvalidPrime(MarkovFLBError, ValueError):
    """Hash alphabet size is not prime."""


class ValidationError(MarkovFLBError, ValueError):
    """Malformed probability vector, matrix or input file."""
