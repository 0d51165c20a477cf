"""Exception hierarchy for evbounds.

Exit-code mapping used by the CLI:
  2 -- configuration / input errors (ConfigError and subclasses)
  3 -- numerical or reliability failures (NumericalError and subclasses)
  4 -- theorem-hypothesis violation surfaced in strict mode
"""


class EvboundsError(Exception):
    """Base class for all package-specific errors."""


class ConfigError(EvboundsError):
    """Invalid configuration, arguments, or preconditions on user input."""


class DomainError(ConfigError):
    """An argument lies outside the mathematical domain of an operation."""


class CapabilityError(ConfigError):
    """The request is valid but outside what this implementation supports
    (e.g. tensor quadrature beyond three dimensions)."""


class NumericalError(EvboundsError):
    """A numerical routine failed to produce a certified result."""


class SingularityError(NumericalError):
    """A matrix that must be positive definite / full rank is not."""


class NonConvergenceError(NumericalError):
    """An iterative solver exhausted its budget without meeting tolerance."""


class ReliabilityError(NumericalError):
    """A stochastic estimate failed its reliability gate (e.g. effective
    sample size below floor)."""


class BoxError(NumericalError):
    """Quadrature box too small: non-negligible posterior mass on the
    boundary.  Carries a suggested replacement halfwidth."""

    def __init__(self, message, suggested_halfwidth=None):
        super().__init__(message)
        self.suggested_halfwidth = suggested_halfwidth


class HypothesisViolation(EvboundsError):
    """Raised in strict mode when a validity flag required by the bound's
    hypotheses is false (e.g. curvature ratio out of range)."""
