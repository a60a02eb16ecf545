"""Exception hierarchy shared by every module."""


class ClvrError(Exception):
    """Base class for all library errors."""


class ExecutionError(ClvrError):
    """A swap produced a non-finite result or would drain a reserve."""


class InvalidOrderingError(ClvrError, ValueError):
    """An ordering is not a permutation of the block's trades."""


class UndefinedMetricError(ClvrError, ValueError):
    """A metric was requested on input where it has no value (empty block, zero wealth)."""


class TractabilityError(ClvrError):
    """Exhaustive search was requested on a block larger than the factorial cap."""


class IngestionError(ClvrError, ValueError):
    """A CSV record could not be parsed."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
