"""Exception hierarchy shared across the package.

Validation failures raise :class:`ValidationError`; file-format problems raise
one of the :class:`FormatError` subclasses so callers (and the CLI exit-code
table) can tell bad magic, wrong version, and truncation apart.
"""


class UqtriageError(Exception):
    """Base class for all package errors."""

    exit_code = 1


class ValidationError(UqtriageError, ValueError):
    """Invalid argument or data contract violation."""

    exit_code = 1


class NumericalError(UqtriageError, ArithmeticError):
    """Numerically unusable input, e.g. a non-SPD covariance."""

    exit_code = 4


class DegenerateTaxonomyError(UqtriageError):
    """Calibration produced an empty UAR or UAI partition; no surrogate possible."""

    exit_code = 5


class FormatError(UqtriageError):
    """Base class for binary/text artifact format problems."""

    exit_code = 2


class BadMagicError(FormatError):
    """File does not start with the expected magic bytes."""


class VersionMismatchError(FormatError):
    """File carries an unsupported format version."""


class TruncatedFileError(FormatError):
    """File ends before the payload promised by its header."""


class MissingFieldError(FormatError):
    """An optional payload section (labels, coords) was requested but absent."""

    exit_code = 3
