"""Exception hierarchy shared across the package.

The three broad families map onto the CLI exit codes: configuration
problems (exit 2), data/ingestion problems (exit 3), and numeric
failures during optimization (exit 4).
"""

from __future__ import annotations


class ChemNmfError(Exception):
    """Base class for all errors raised by this package."""


class ConfigurationError(ChemNmfError):
    """Invalid parameter, grid, or solver configuration."""


class ShapeMismatchError(ConfigurationError):
    """Operands have incompatible shapes; carries both shapes."""

    def __init__(self, message: str, shape_a=None, shape_b=None):
        super().__init__(message)
        self.shape_a = shape_a
        self.shape_b = shape_b


class DataError(ChemNmfError):
    """Malformed or inconsistent input data."""


class RaggedRowsError(DataError):
    """CSV rows do not all have the same number of fields."""


class InvalidValueError(DataError):
    """Entry is negative, non-numeric, or non-finite where it must not be."""


class PgmError(DataError):
    """Malformed PGM header or truncated pixel payload."""


class WavError(DataError):
    """Unsupported or malformed WAV file."""


class AssemblyError(DataError):
    """Samples cannot be assembled into one dataset matrix."""


class NumericError(ChemNmfError):
    """Optimization produced a non-finite or otherwise unusable value."""
