"""Exception hierarchy shared by every stage."""


class UncageError(Exception):
    """Base class for all errors raised by this package."""


class InvalidArgumentError(UncageError, ValueError):
    """An argument violates a documented precondition."""


class UnsatisfiableError(UncageError, ValueError):
    """The request is well-formed but cannot be fulfilled (e.g. nothing to copy from)."""


class UndefinedMetricError(UncageError, ValueError):
    """A metric has empty support (no visible keypoints, no ground truth)."""


class SchemaError(UncageError, ValueError):
    """An input file does not follow the expected schema."""

    def __init__(self, message, record=None):
        super().__init__(message)
        self.record = record
