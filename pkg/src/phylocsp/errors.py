"""Exception types shared across the package."""


class ArgumentError(ValueError):
    """An argument violates an operation's precondition."""


class NotFoundError(KeyError):
    """A leaf or variable identifier is not present."""

    def __str__(self):
        return str(self.args[0]) if self.args else "not found"


class ResourceError(RuntimeError):
    """A computation would exceed a configured enumeration cap."""

    def __init__(self, message, cap=None):
        super().__init__(message)
        self.cap = cap


class Inconsistent(Exception):
    """Raised by BUILD when a triplet set admits no consistent tree.

    ``labels`` holds the label set on which the partition graph was connected.
    """

    def __init__(self, labels):
        super().__init__(f"triplets are conflicting on {sorted(map(str, labels))}")
        self.labels = tuple(labels)
