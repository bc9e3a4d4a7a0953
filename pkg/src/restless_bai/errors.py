"""Exception hierarchy shared by every module in the package."""


class RestlessBAIError(Exception):
    """Base class for all package errors."""


class ValidationError(RestlessBAIError, ValueError):
    """An input violates a documented invariant."""


class NegativeEntry(ValidationError):
    pass


class RowSumViolation(ValidationError):
    pass


class NotErgodic(ValidationError):
    pass


class SupportViolation(ValidationError):
    pass


class DomainError(ValidationError):
    pass


class TiedBestArm(ValidationError):
    pass


class ParseError(RestlessBAIError, ValueError):
    """Malformed configuration file."""


class SingularSystem(RestlessBAIError, ArithmeticError):
    """Linear system for a stationary distribution could not be solved."""


class IllegalAction(RestlessBAIError, ValueError):
    """Arm not in the allowed action set of the current delay state."""


class DelayOverflow(RestlessBAIError, AssertionError):
    pass


class Infeasible(RestlessBAIError, ArithmeticError):
    pass


class Unbounded(RestlessBAIError, ArithmeticError):
    pass


class NumericalBreakdown(RestlessBAIError, ArithmeticError):
    pass


class ZeroMarginal(RestlessBAIError, ArithmeticError):
    pass


class ImpossibleObservation(RestlessBAIError, ArithmeticError):
    pass


class ZeroLikelihood(RestlessBAIError, ArithmeticError):
    pass


class IoError(RestlessBAIError, OSError):
    pass
