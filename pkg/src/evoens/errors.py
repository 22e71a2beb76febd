"""Exception types shared across the package.

``ConfigError`` covers invalid configuration and violated call preconditions
(the CLI maps it to exit code 1); everything else that goes wrong at runtime
maps to exit code 2.
"""


class EvoensError(Exception):
    """Base class for package-specific errors."""


class ConfigError(EvoensError):
    """Invalid configuration value or violated precondition."""


class SplitError(ConfigError):
    """Infeasible or invalid dataset split request."""


class CheckpointError(EvoensError):
    """Unreadable, corrupted, or incompatible checkpoint file."""
