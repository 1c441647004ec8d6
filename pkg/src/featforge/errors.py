"""Exception hierarchy shared across the package.

Exit-code mapping in the CLI relies on these classes: usage problems are
argparse's domain, DataError (and subclasses) mean bad input data, and
ConvergenceError means a solver gave up.
"""

from __future__ import annotations


class FeatforgeError(Exception):
    """Base class for package errors."""


class DataError(FeatforgeError):
    """Malformed, inconsistent, or out-of-contract input data."""


class SchemaError(DataError):
    """Dataset schema problems: unknown units, missing columns, bad kinds."""


class MissingColumnError(DataError):
    """An expression referenced columns absent from the provided data."""

    def __init__(self, names: list[str]):
        self.names = sorted(names)
        super().__init__(f"missing columns: {', '.join(self.names)}")


class VersionError(DataError):
    """Persisted model written by a newer format version."""


class ConvergenceError(FeatforgeError):
    """Solver hit its iteration budget; carries the best iterate found."""

    def __init__(self, message: str, fit=None):
        self.fit = fit
        super().__init__(message)
