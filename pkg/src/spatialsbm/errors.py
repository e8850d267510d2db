"""Exception taxonomy shared across the package.

The CLI maps these onto exit codes: usage problems exit 2, input/parse
problems and invalid data exit 3, numeric failures exit 4.
"""


class SpatialSbmError(Exception):
    """Base class for all package-specific errors."""


class InputFormatError(SpatialSbmError):
    """A file could not be parsed (bad CSV/TSV layout, bad binary header)."""


class DataError(SpatialSbmError):
    """Parsed input carries unusable values (non-finite, empty cell, ...)."""


class NumericError(SpatialSbmError):
    """A numeric computation produced an unusable result."""
