"""Exception types shared across the package."""


class TreefairError(Exception):
    """Base class for all package errors."""


class ModelFormatError(TreefairError):
    """A model document is malformed or violates a structural invariant.

    ``location`` points at the offending element, e.g. ``trees[0].left.feature``.
    """

    def __init__(self, message: str, location: str = ""):
        self.location = location
        if location:
            message = f"{message} (at {location})"
        super().__init__(message)


class InputError(TreefairError):
    """Invalid user-supplied input (unknown feature name, bad dataset, ...)."""


class ResourceLimitError(TreefairError):
    """An analysis exceeded a configured resource bound.

    Signals that the model is too large for exact analysis under the current
    limits rather than a bug; callers may retry with higher limits.
    """

    def __init__(self, message: str, limit: int):
        self.limit = limit
        super().__init__(message)
