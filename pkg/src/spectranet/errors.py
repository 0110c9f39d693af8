"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: configuration problems count as usage
errors (1), file/data problems as data errors (2) and non-finite numerics
as numeric errors (3).
"""


class SpectraError(Exception):
    """Base class for all errors raised by this package."""


class ShapeError(SpectraError, ValueError):
    """An array or tensor violates a dimension contract."""


class ConfigError(SpectraError, ValueError):
    """A configuration value is out of its allowed range."""


class FormatError(SpectraError, ValueError):
    """A file does not conform to its binary or textual format."""


class NumericError(SpectraError, ArithmeticError):
    """A computation produced or received non-finite values."""


class MissingEmbeddingError(SpectraError, KeyError):
    """A content id has no embedding and stub fallback is disabled."""


class UndefinedMetricError(SpectraError, ValueError):
    """A metric is undefined for the given label distribution."""


class UsageError(SpectraError):
    """Bad command line; carries the argparse message."""
