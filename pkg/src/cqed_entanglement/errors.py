"""Exception types raised across the package."""


class CQEDError(Exception):
    """Base class for all package errors."""


class TruncationError(CQEDError):
    """The Fock truncation is too small for the requested state or evolution."""


class DomainError(CQEDError, ValueError):
    """An argument lies outside the domain where a formula is defined."""


class NumericalError(CQEDError, ArithmeticError):
    """A numerical object violates a physical constraint beyond tolerance."""


class DegenerateSteadyState(CQEDError):
    """The Liouvillian kernel is not one-dimensional."""


class StepSizeError(CQEDError):
    """The integration step is too coarse for the dynamics."""


class InsufficientData(CQEDError):
    """Not enough samples for a meaningful error estimate."""
