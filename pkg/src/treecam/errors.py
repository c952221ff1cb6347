"""Exception types and CLI exit codes."""


class TreecamError(Exception):
    """Base class for all treecam errors."""


class DataError(TreecamError):
    """Malformed or inconsistent input data (files, datasets, documents)."""


class InvariantError(TreecamError):
    """An internal invariant was violated; indicates a bug or corrupt state."""


EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_INVARIANT = 3
