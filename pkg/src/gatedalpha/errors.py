"""Exception hierarchy shared across the package.

The CLI maps each family to an exit code: ConfigError -> 1, DataError -> 2,
NumericError -> 3.
"""


class GatedAlphaError(Exception):
    """Base class for all package errors."""


class ConfigError(GatedAlphaError, ValueError):
    """Invalid configuration or usage."""


class DataError(GatedAlphaError, ValueError):
    """Malformed or insufficient input data."""


class ShapeError(GatedAlphaError, ValueError):
    """Tensor shapes do not agree."""


class NumericError(GatedAlphaError, FloatingPointError):
    """A non-finite value appeared where a finite one is required."""
