"""Exception hierarchy shared by every layer of the package."""


class IdepcaError(Exception):
    """Base class for all errors raised by this package."""


class ExprError(IdepcaError):
    """Problem with an expression source string.

    ``position`` is a 0-based byte offset into the UTF-8 encoded source,
    or ``None`` when no location applies.
    """

    def __init__(self, message, position=None):
        self.position = position
        if position is not None:
            message = f"{message} (at byte {position})"
        super().__init__(message)


class LexError(ExprError):
    pass


class ParseError(ExprError):
    pass


class UnknownIdentifierError(ParseError):
    pass


class WrongVariableError(ParseError):
    pass


class DomainError(IdepcaError, ArithmeticError):
    """Evaluation left the real domain (ln of 0, overflow, ...)."""


class NegativeCoefficientError(IdepcaError):
    """b(t) or c(t) went negative during integration or quadrature."""

    def __init__(self, name, t, value):
        self.name = name
        self.t = t
        self.value = value
        super().__init__(f"{name}({t!r}) = {value!r} is negative; {name} must be >= 0")


class InvalidProblemError(IdepcaError):
    """A problem with validation errors was passed to a solver entry point."""

    def __init__(self, report):
        self.report = report
        lines = "; ".join(f"{i.code}: {i.message}" for i in report.errors)
        super().__init__(f"invalid problem: {lines}")


class IntegrationError(IdepcaError):
    pass


class QuadratureError(IdepcaError):
    pass


class CriterionError(IdepcaError):
    """A criterion cannot be evaluated (empty scan, failed hypothesis)."""


class WindowTooShortError(IdepcaError):
    pass
