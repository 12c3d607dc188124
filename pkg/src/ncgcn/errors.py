"""Exception hierarchy shared across the package."""


class NcgcnError(Exception):
    """Base class for all package errors."""


class InputError(NcgcnError, ValueError):
    """Malformed or out-of-range input (ids, shapes)."""


class ConfigError(NcgcnError, ValueError):
    """Invalid configuration value (threshold, hop count, reduction...)."""


class DataError(NcgcnError, ValueError):
    """Dataset content that cannot be used (bad bundle, tiny classes)."""


class SchemaError(NcgcnError, ValueError):
    """Report or config file that violates its schema."""


class TrainingError(NcgcnError, RuntimeError):
    """Numerical failure during training (non-finite loss or gradient)."""


class InternalError(NcgcnError, RuntimeError):
    """Broken internal contract, e.g. a stale propagation set."""
