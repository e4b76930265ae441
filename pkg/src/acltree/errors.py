"""Exception types shared across the package."""


class AclTreeError(Exception):
    """Base class for all acltree errors."""


class AlphabetError(AclTreeError):
    """Invalid alphabet, or a symbol outside the alphabet."""


class FormatError(AclTreeError):
    """Malformed or empty input data, or a corrupt artifact file."""


class DepthExceededError(AclTreeError):
    """Query string longer than the index build depth (distinct from count 0)."""


class UndefinedAverageError(AclTreeError):
    """Average match length requested for a sequence with zero matched positions."""
