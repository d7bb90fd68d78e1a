"""Exception hierarchy. Each family carries the exit code used by the CLI."""

from __future__ import annotations


class AmoebaError(Exception):
    exit_code = 2


class UsageError(AmoebaError):
    exit_code = 1


class ParseError(UsageError):
    def __init__(self, message: str, position: str = "$"):
        super().__init__(f"{position}: {message}")
        self.position = position


class PreconditionError(UsageError):
    pass


class WindowOverflowError(UsageError):
    pass


class SpecMismatchError(UsageError):
    pass


class NumericError(AmoebaError):
    exit_code = 2


class DomainError(NumericError):
    pass


class SingularNodeError(NumericError):
    pass


class ConditioningError(NumericError):
    def __init__(self, message: str, nodes: int):
        super().__init__(f"{message} (nodes={nodes})")
        self.nodes = nodes


class PrecisionError(NumericError):
    pass


class BoundaryZeroError(NumericError):
    pass


class DepthExceededError(NumericError):
    def __init__(self, message: str, boxes=()):
        super().__init__(f"{message}: {len(boxes)} unresolved box(es)")
        self.boxes = list(boxes)


class MultiplicityError(NumericError):
    pass


class NonFiniteSampleError(NumericError):
    def __init__(self, message: str, location=None):
        super().__init__(f"{message} at {location}")
        self.location = location


class NotConvertibleError(NumericError):
    pass


class DegenerateInputError(AmoebaError):
    exit_code = 3


class ZeroPolynomialError(DegenerateInputError):
    """Signals a result that would be the (unrepresentable) zero polynomial."""


class DegenerateFiberError(DegenerateInputError):
    pass
