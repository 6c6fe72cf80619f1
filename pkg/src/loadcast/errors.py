"""Exception hierarchy shared across the toolkit.

The CLI maps these onto process exit codes, so everything user-facing
raises one of them rather than a bare ValueError.
"""


class LoadcastError(Exception):
    """Base class for all toolkit errors."""


class ConfigError(LoadcastError):
    """Invalid configuration: bad hyperparameters, shapes, trigger cycles."""


class DataError(LoadcastError):
    """Malformed or insufficient input data (CSV parse failures, empty frames)."""


class NumericError(LoadcastError):
    """Non-finite values where finiteness is required (NaN/Inf in inputs or gradients)."""


class ShapeError(ConfigError):
    """Dimension mismatch between arrays; message names both shapes."""
