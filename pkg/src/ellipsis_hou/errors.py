"""Exception hierarchy shared by every layer of the engine."""


class EllipsisError(Exception):
    """Base class for engine errors."""


class TypeMismatch(EllipsisError):
    pass


class UnknownConstant(EllipsisError):
    pass


class BudgetExhausted(EllipsisError):
    """Search was truncated by the budget; this is not a proof of failure."""


class NotUnifiable(EllipsisError):
    """The search space was exhausted without finding a unifier."""

    def __init__(self, message, reason="clash"):
        super().__init__(message)
        self.reason = reason


class NotSecondOrder(EllipsisError):
    pass


class ElementNotFound(EllipsisError):
    pass


class NoReading(EllipsisError):
    def __init__(self, message, causes=()):
        super().__init__(message)
        self.causes = list(causes)


class DischargeOrderViolation(EllipsisError):
    pass


class DslSyntaxError(EllipsisError):
    def __init__(self, message, line=0, column=0):
        super().__init__(f"{message} (line {line}, column {column})")
        self.line = line
        self.column = column


class UnresolvedSelector(EllipsisError):
    pass
