"""Exception types; the CLI maps them onto exit codes."""


class DimensionError(ValueError):
    pass


class DomainError(ValueError):
    pass


class CheckpointError(ValueError):
    pass


class DataError(ValueError):
    """Malformed or non-binary dataset content."""


class OracleSizeError(ValueError):
    pass


class NumericalError(RuntimeError):
    """Training diverged (non-finite loss or gradient)."""


class TraceMismatchError(RuntimeError):
    pass
