"""Exception hierarchy shared by every eventplan module."""


class EventPlanError(Exception):
    """Base class for all errors raised by eventplan."""


class LocatedError(EventPlanError):
    """An error tied to a position in a source text."""

    def __init__(self, message, line=None, col=None):
        self.message = message
        self.line = line
        self.col = col
        where = f"{line}:{col}: " if line is not None else ""
        super().__init__(f"{where}{message}")


class DomainSyntaxError(LocatedError):
    pass


class SemanticError(LocatedError):
    pass


class TypeMismatch(EventPlanError):
    pass


class ArityError(EventPlanError):
    pass


class UnknownPredicate(EventPlanError):
    pass


class UnknownOperator(LocatedError):
    pass


class NotApplicable(EventPlanError):
    pass


class FunctionalConflict(EventPlanError):
    pass


class NoPlanFound(EventPlanError):
    pass


class Unsolvable(NoPlanFound):
    pass


class InvalidPlan(EventPlanError):
    pass


class PositionOutOfRange(EventPlanError, IndexError):
    pass


class NetTooLarge(EventPlanError):
    pass


class TreeTooLarge(EventPlanError):
    pass


class RepairFailed(EventPlanError):
    pass


class DomainError(EventPlanError, ValueError):
    """A numeric argument lies outside the domain of a closed form."""
