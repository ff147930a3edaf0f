"""Exception types shared across the package."""


class LambdaTreeError(Exception):
    """Base class for all package errors."""


class TreeParseError(LambdaTreeError):
    """Malformed tree input. Carries the 1-based line number when known."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class CapExceededError(LambdaTreeError):
    """An exhaustive routine was asked to handle an instance above its size cap."""


class InvariantViolationError(LambdaTreeError):
    """An internal consistency guarantee failed; signals a bug, not bad input."""


class PartitionPreconditionError(LambdaTreeError):
    """Vertex partitioning was attempted on a tree that was not preprocessed."""
