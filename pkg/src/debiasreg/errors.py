"""Exception types raised across the package."""


class DebiasRegError(Exception):
    """Base class for all package errors."""


class NonFiniteInput(DebiasRegError, ValueError):
    pass


class DimensionMismatch(DebiasRegError, ValueError):
    pass


class DegeneratePartition(DebiasRegError, ValueError):
    pass


class BadSize(DebiasRegError, ValueError):
    pass


class IndexOutOfRange(DebiasRegError, IndexError):
    pass


class DegenerateVariance(DebiasRegError, ValueError):
    pass


class EmptyTail(DebiasRegError, ValueError):
    pass


class SingularKKT(DebiasRegError, ArithmeticError):
    pass


class SingularInnerSolve(DebiasRegError, ArithmeticError):
    pass


class InfeasibleConstraint(DebiasRegError, ValueError):
    pass


class MaxIterExceeded(DebiasRegError, RuntimeError):
    """Iteration budget exhausted; ``result`` holds the best iterate found."""

    def __init__(self, message, result=None):
        super().__init__(message)
        self.result = result


class ParseError(DebiasRegError, ValueError):
    def __init__(self, message, row=None, column=None):
        super().__init__(message)
        self.row = row
        self.column = column


class MissingColumn(DebiasRegError, KeyError):
    pass
