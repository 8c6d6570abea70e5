"""Exception hierarchy shared by every gridshare module."""


class GridshareError(Exception):
    """Base class for all errors raised by gridshare."""


class ValidationError(GridshareError, ValueError):
    """Bad input: malformed files, inconsistent parameters, broken invariants."""


class DataError(GridshareError):
    """Input is well formed but cannot be processed (e.g. a disconnected graph)."""
