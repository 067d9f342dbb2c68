"""Exception types shared across the package.

Exit codes: 2 is reserved for CLI usage errors (raised by click), 3 for
data/format problems, 4 for numeric failures such as divergence.
"""


class GraphHashError(Exception):
    """Base class for errors raised by this package."""

    exit_code = 1


class DataError(GraphHashError):
    """Malformed input files, mismatched artifact shapes, bad arguments."""

    exit_code = 3


class NumericError(GraphHashError):
    """Non-finite losses or gradients, diverging optimization."""

    exit_code = 4
