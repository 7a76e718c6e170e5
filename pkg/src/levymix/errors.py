"""Exception hierarchy shared by all modules."""


class LevymixError(Exception):
    """Base class for all errors raised by levymix."""


class ParameterError(LevymixError, ValueError):
    """A family parameter lies outside its declared domain."""


class DomainError(LevymixError, ValueError):
    """An argument (time, rate, grid) lies outside the admissible range."""


class PreconditionError(LevymixError, ValueError):
    """An operation was called on an object that does not meet its precondition."""


class AssumptionError(LevymixError):
    """The integrability assumptions on the kill/drift rates or on V(y) fail."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class NumericError(LevymixError, ArithmeticError):
    """Quadrature or transform inversion did not reach the requested accuracy."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class HorizonError(LevymixError):
    """A path did not cross the requested level within its (extended) horizon."""


class ConfigError(LevymixError, ValueError):
    """A configuration document references an unknown built-in or is malformed."""
