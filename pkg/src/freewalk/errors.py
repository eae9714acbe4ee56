"""Exception hierarchy shared across the package."""


class FreewalkError(Exception):
    """Base class for all library errors."""


class DomainError(FreewalkError):
    """An argument is outside the mathematical domain of the operation."""


class UsageError(FreewalkError):
    """The operation was called in a way its contract forbids."""


class InvariantViolation(FreewalkError):
    """An input breaks a structural invariant (e.g. determinant not 1)."""


class ConfigError(FreewalkError):
    """A configuration document or data file is malformed."""
