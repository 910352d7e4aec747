"""Exception taxonomy shared by every gpal module.

The CLI maps these onto exit codes: validation errors exit 1, numerical
failures exit 2, file/format problems exit 3.
"""


class GpalError(Exception):
    """Base class for all errors raised by gpal."""


class ValidationError(GpalError):
    """Bad arguments, malformed configuration, or violated preconditions."""


class NumericalError(GpalError):
    """Linear algebra or optimization failed beyond recoverable jitter."""


class DataFormatError(GpalError):
    """A file does not conform to the documented on-disk format."""


class TruncationError(DataFormatError):
    """A file header declares more payload than the file contains."""


class OracleError(GpalError):
    """The label oracle failed or timed out; runs abort with a partial report."""
