"""Exception hierarchy."""


class PercolationError(Exception):
    """Base class for all errors raised by this package."""


class InvalidArgumentError(PercolationError, ValueError):
    pass


class UnsupportedOperationError(PercolationError):
    pass


class ResourceLimitError(PercolationError):
    pass


class InternalInvariantError(PercolationError, AssertionError):
    """An algorithmic guarantee failed; always a bug or a numerical breakdown."""


class BracketingError(PercolationError):
    """A sweep never crossed the requested threshold.

    The sweep report is attached as ``report`` so callers can inspect it.
    """

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class UndefinedGiantError(PercolationError):
    """No spanning cluster exists to act as the infinite-cluster proxy."""
