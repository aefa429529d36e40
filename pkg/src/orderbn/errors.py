"""Exception hierarchy shared across the package."""


class OrderBNError(Exception):
    """Base class for every error raised by orderbn."""


class OrderViolation(OrderBNError):
    def __init__(self, child, parent):
        self.child = child
        self.parent = parent
        super().__init__(f"parent {parent} does not precede child {child} in the ordering")


class UnknownVariable(OrderBNError):
    pass


class OutOfRange(OrderBNError):
    pass


class UndefinedCptRow(OrderBNError):
    pass


class StateSpaceTooLarge(OrderBNError):
    pass


class SupportMismatch(OrderBNError):
    pass


class ScopeOverlap(OrderBNError):
    pass


class NotNested(OrderBNError):
    pass


class DomainError(OrderBNError, ValueError):
    pass


class RuleInputMismatch(OrderBNError):
    pass


class TooManyPredecessors(OrderBNError):
    pass


class InternalConsistencyError(OrderBNError):
    """A summation produced a negative value larger than round-off allows."""


class DataError(OrderBNError):
    pass


class RaggedRow(DataError):
    def __init__(self, line, expected, got):
        self.line = line
        super().__init__(f"line {line}: expected {expected} fields, got {got}")


class EmptyDataset(DataError):
    pass


class MissingCell(DataError):
    def __init__(self, line, column):
        self.line = line
        self.column = column
        super().__init__(f"line {line}: missing value in column {column!r}")


class CardinalityOne(DataError):
    def __init__(self, column):
        self.column = column
        super().__init__(f"column {column!r} is constant (cardinality 1)")


class SchemaError(OrderBNError):
    def __init__(self, path, message):
        self.path = path
        super().__init__(f"{path}: {message}")
