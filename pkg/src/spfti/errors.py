"""Exception types shared across the package.

The CLI maps each class to a distinct exit code.
"""


class SpftiError(Exception):
    exit_code = 1


class ConfigError(SpftiError, ValueError):
    exit_code = 2


class FormatError(SpftiError, OSError):
    """Malformed or missing file."""

    exit_code = 3


class NumericalError(SpftiError, RuntimeError):
    exit_code = 4


class DimensionError(SpftiError, ValueError):
    exit_code = 5
