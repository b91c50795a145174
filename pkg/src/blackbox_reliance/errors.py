"""Exception hierarchy shared by every module.

The CLI maps these onto exit codes: usage/config problems exit 1, data
problems exit 2, numerical failures exit 3.
"""


class RelianceError(Exception):
    """Base class for all errors raised by this package."""

    exit_code = 1
    kind = "error"


class UsageError(RelianceError, ValueError):
    """A precondition on arguments or configuration is violated."""

    exit_code = 1
    kind = "usage"


class SchemaError(RelianceError, ValueError):
    """The declared schema is inconsistent, or a file does not match it."""

    exit_code = 1
    kind = "schema"


class DataError(RelianceError, ValueError):
    """A data value cannot be parsed or violates its column type."""

    exit_code = 2
    kind = "data"

    def __init__(self, message, row=None, column=None):
        super().__init__(message)
        self.row = row
        self.column = column


class OracleDomainError(RelianceError, ValueError):
    """The oracle failed (raised, or returned a non-finite or out-of-range
    value) on a spliced record. ``pair`` holds the ``(i, j)`` row indices."""

    exit_code = 2
    kind = "oracle_domain"

    def __init__(self, message, pair=None):
        super().__init__(message)
        self.pair = pair


class NumericalError(RelianceError, ArithmeticError):
    """A numerical routine failed or an internal identity check did not hold."""

    exit_code = 3
    kind = "numerical"
