"""Exception types shared across the package.

The CLI maps these onto exit codes: file/format problems exit with 1,
configuration and contract violations exit with 2.
"""


class SupclustError(Exception):
    """Base class for all package-specific errors."""


class DataFormatError(SupclustError):
    """A dataset file is malformed, truncated, or carries invalid values."""


class ConfigError(SupclustError, ValueError):
    """A configuration or contract precondition is violated."""


class BudgetExhaustedError(ConfigError):
    """The requested query budget exceeds the remaining unlabeled pool."""


class MissingModelError(ConfigError):
    """An uncertainty strategy was invoked without classifier probabilities."""
