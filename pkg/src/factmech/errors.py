"""Typed exception hierarchy shared across the package.

Everything raised on purpose derives from FactmechError so callers can
distinguish our failures from genuine bugs. ValueError/RuntimeError mixins
keep the types usable with code that catches the stdlib classes.
"""


class FactmechError(Exception):
    """Base class for all errors raised by factmech."""


class ValidationError(FactmechError, ValueError):
    """A value object or argument violates its documented domain."""


class DomainError(FactmechError, ValueError):
    """A mathematical precondition fails (e.g. m = 0 where a loss divides by m)."""


class SingularityError(DomainError):
    """A formula is singular at the given inputs (e.g. no other contributors)."""


class DegeneratePenaltyError(DomainError):
    """Penalty scale is zero where the penalty formula divides by it."""


class ConfigurationError(FactmechError, ValueError):
    """A scenario/config file is malformed or internally inconsistent."""


class NoContributorsError(ConfigurationError):
    """A roster has no data contributors where at least one is required."""


class SearchError(FactmechError, RuntimeError):
    """A numeric search hit a non-finite objective value.

    Carries the offending evaluation point so the failure is reproducible.
    """

    def __init__(self, message: str, point=None):
        super().__init__(message)
        self.point = point


class InvariantViolation(FactmechError, RuntimeError):
    """Internal accounting identity broke; indicates a bug, not bad input."""


# Process exit codes used by the CLI.
EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_BAD_CONFIG = 2
EXIT_INTERNAL = 3
