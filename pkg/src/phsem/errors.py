"""Exception hierarchy shared by all modules."""


class PhsemError(Exception):
    """Base class for library errors."""


class CyclicGraph(PhsemError, ValueError):
    def __init__(self, cycle=None):
        self.cycle = cycle
        msg = "edge set contains a directed cycle"
        if cycle:
            msg += ": " + "->".join(map(str, cycle))
        super().__init__(msg)


class BudgetExceeded(PhsemError, RuntimeError):
    pass


class SupportViolation(PhsemError, ValueError):
    pass


class InvalidConditioningSet(PhsemError, ValueError):
    pass


class DimensionMismatch(PhsemError, ValueError):
    pass


class DegenerateData(PhsemError, ValueError):
    pass


class SingularRegression(PhsemError, ArithmeticError):
    pass


class InternalInconsistency(PhsemError, AssertionError):
    pass
