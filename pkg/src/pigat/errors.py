"""Error taxonomy shared across the package.

The CLI maps these onto process exit codes: operator-facing data problems
exit 2, numeric failures exit 3, bad invocations exit 1. Library-level
misuse (stale caches, shape mismatches) raises and is never swallowed.
"""


class ShapeError(ValueError):
    """Array shapes do not chain for the requested operation."""


class DomainError(ValueError):
    """An argument value is outside the operation's domain."""


class UsageError(RuntimeError):
    """An API was called out of protocol, e.g. a stale forward cache."""


class DataError(ValueError):
    """Malformed or inconsistent input data (files, configs, schemas)."""


class UndefinedMetricError(DataError):
    """A metric has no defined value, e.g. AUC with an empty class."""


class NumericError(RuntimeError):
    """Training or verification hit a numeric failure (NaN, bad gradients)."""
