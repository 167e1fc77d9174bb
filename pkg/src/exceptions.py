"""Error hierarchy shared by every deflab module."""


class DeflabError(Exception):
    """Base class for all deflab errors."""


class DomainError(DeflabError, ValueError):
    """An input violates an operation's precondition."""


class CapacityError(DeflabError, ValueError):
    """A dimension or table size exceeds its configured cap."""


class ConfigError(DeflabError, ValueError):
    """A run configuration failed validation."""


class InvariantViolation(DeflabError, AssertionError):
    """An asserted numerical postcondition does not hold."""
