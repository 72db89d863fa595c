"""Exception hierarchy shared across the package."""

from __future__ import annotations


class ReshError(Exception):
    """Base class for all errors raised by this package."""


class SourceError(ReshError):
    """An error tied to a position in source text."""

    def __init__(self, message: str, line: int, col: int):
        super().__init__(f"{line}:{col}: {message}")
        self.message = message
        self.line = line
        self.col = col


class LexError(SourceError):
    pass


class ParseError(SourceError):
    pass


class CheckError(ReshError):
    """Static errors found after parsing (typing, scoping, recursion)."""


class TypeMismatch(CheckError):
    def __init__(self, context: str, expected, found):
        super().__init__(f"{context}: expected {expected}, found {found}")
        self.expected = expected
        self.found = found


class UnknownAction(CheckError):
    pass


class UnknownVariable(CheckError):
    pass


class UnknownTask(CheckError):
    pass


class NonBooleanWithClause(CheckError):
    pass


class CycleError(CheckError):
    def __init__(self, path):
        super().__init__("recursive task calls: " + " -> ".join(path))
        self.path = list(path)


class IllegalLetter(ReshError):
    """A timing-diagram letter that the current execution state forbids."""


class BudgetExceeded(ReshError):
    """Brute-force word enumeration exceeded its node budget."""


class DecodeError(ReshError):
    def __init__(self, reason: str, position: int = 0, raw: str = ""):
        super().__init__(f"at byte {position}: {reason}")
        self.reason = reason
        self.position = position
        self.raw = raw


class NoPath(ReshError):
    """No collision-free route exists for a robot."""

    def __init__(self, robot: str, detail: str = ""):
        super().__init__(f"no path for {robot}" + (f": {detail}" if detail else ""))
        self.robot = robot


class SolverTimeout(ReshError):
    pass


class StaleSolution(ReshError):
    def __init__(self, epoch: int, current: int):
        super().__init__(f"solution for epoch {epoch} arrived in epoch {current}")
        self.epoch = epoch


class UnknownProgram(ReshError):
    pass


class DuplicateName(ReshError):
    """Two pool members with the same robot name."""


class PoseOccupied(ReshError):
    """A spawn pose that lies in an occupied map cell."""
