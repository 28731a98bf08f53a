"""Exception types shared across the package."""


class IseLabError(Exception):
    """Base class for all errors raised by ise_lab."""


class DegenerateInputError(IseLabError, ValueError):
    """An input violates a numeric precondition (zero norm, empty set, ...)."""


class ConfigError(IseLabError, ValueError):
    """A configuration value is missing, malformed or inconsistent."""


class InvariantError(IseLabError, RuntimeError):
    """An internal invariant was violated at runtime."""
