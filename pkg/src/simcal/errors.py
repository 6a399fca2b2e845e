"""Exception types raised across the package."""


class SimcalError(Exception):
    """Base class for all package errors."""


class ConfigurationError(SimcalError, ValueError):
    pass


class DimensionError(SimcalError, ValueError):
    pass


class SingularityError(SimcalError, ArithmeticError):
    """A propagation kernel was evaluated at (or too close to) zero distance."""


class UndefinedReferenceError(SimcalError, ValueError):
    pass


class EmptyInputError(SimcalError, ValueError):
    pass
