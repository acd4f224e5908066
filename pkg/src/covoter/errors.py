"""Exception types shared across the package."""


class ContractViolation(ValueError):
    """An argument lies outside the documented domain of an operation."""


class ConfigurationError(ValueError):
    """A run or solver was configured inconsistently (CFL, coverage, keys)."""


class DegenerateKernelError(ArithmeticError):
    """The normaliser of an opinion-adoption probability vanished."""


class SingularParameterError(ArithmeticError):
    """A recursion hit a pole for the given rates."""


class BudgetError(ValueError):
    """An exact computation would exceed its enumeration budget."""
