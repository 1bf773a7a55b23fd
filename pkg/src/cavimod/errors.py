"""Exception hierarchy shared by all cavimod modules."""


class CavimodError(Exception):
    """Base class for every error raised by cavimod."""


class DomainError(CavimodError, ValueError):
    """A point lies outside the punctured unit ball 0 < |x| < 1."""


class ParameterError(CavimodError, ValueError):
    """An argument or map parameter is outside its admissible range."""


class EvaluationError(CavimodError, ArithmeticError):
    """A map or Jacobian evaluation produced non-finite values."""


class IrregularPointError(CavimodError, ArithmeticError):
    """The Jacobian is singular or orientation-reversing at the point."""


class IntegrationError(CavimodError, ArithmeticError):
    """Too many quadrature nodes were irregular to trust the integral."""

    def __init__(self, message, fraction):
        super().__init__(message)
        self.fraction = fraction


class ExpressionError(CavimodError, ValueError):
    """A map expression could not be parsed; ``position`` is 0-based."""

    def __init__(self, message, position=None):
        if position is not None:
            message = f"{message} (at position {position})"
        super().__init__(message)
        self.position = position
