"""Exception hierarchy shared across the package.

CLI exit codes map onto these: ConfigError -> 2, NumericsError -> 3,
OS-level I/O failures -> 4. Everything else is a plain bug.
"""


class PredpreyError(Exception):
    """Base class for all package-specific errors."""


class ConfigError(PredpreyError):
    """Invalid or inconsistent configuration (bad key, bad value, impossible layout)."""


class StructuralError(PredpreyError):
    """Shape/dimension mismatch between otherwise valid pieces of data."""


class InputError(PredpreyError):
    """Malformed runtime input (non-finite observation, out-of-range action index)."""


class NumericsError(PredpreyError):
    """Non-finite values encountered mid-computation; the operation was aborted."""


class ContractViolation(PredpreyError):
    """An operation was invoked in a state its contract forbids."""


class CheckpointError(PredpreyError):
    """Checkpoint file unreadable: wrong tag, wrong version, truncated, or corrupted."""
