"""Error types that the CLI maps to distinct exit codes."""


class ConfigError(ValueError):
    """Invalid or malformed run configuration."""


class DataError(ValueError):
    """Unreadable, corrupt, or inconsistent input data."""


class TrainingError(RuntimeError):
    """Training could not produce a usable model."""


class LeakageError(AssertionError):
    """A fitting step was handed trials reserved for evaluation."""
