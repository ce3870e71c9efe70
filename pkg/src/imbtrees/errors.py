"""Exception hierarchy.

DataError subclasses map to CLI exit code 3, ConfigError to exit code 2.
"""


class ImbtreesError(Exception):
    """Base class for all package errors."""


class ConfigError(ImbtreesError):
    """Invalid or unknown configuration key/value (CLI exit code 2)."""


class InvalidParameter(ImbtreesError):
    """A function argument is outside its documented domain."""


class DataError(ImbtreesError):
    """Base class for dataset ingestion/validation errors (CLI exit code 3)."""


class MissingValue(DataError):
    """A cell in the input table is empty."""


class NotBinary(DataError):
    """The class column does not contain exactly two distinct labels."""


class UnknownLevel(DataError):
    """A categorical value is not in the declared level list."""


class SchemaMismatch(DataError):
    """A declared column is missing or a value does not fit its type."""


class EmptySample(ImbtreesError):
    """An undersampling target rounded to zero rows."""


class DegenerateInput(ImbtreesError):
    """Tree fitting got input it cannot learn from (e.g. one class absent)."""


class LengthMismatch(ImbtreesError):
    """Paired sequences have different lengths."""


class MissingClass(ImbtreesError):
    """A truth vector does not contain both classes."""


class NoInterpretableTree(ImbtreesError):
    """Every fitted tree in a cell was rejected by the interpretability filter.

    Reported on the cell result, never raised by the grid runner.
    """
