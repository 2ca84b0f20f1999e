"""Exception types that map onto the CLI exit codes."""


class ConfigError(ValueError):
    """Invalid configuration: bad key, bad value, inconsistent settings."""


class NumericalError(RuntimeError):
    """A numerical procedure failed to produce a trustworthy result."""
