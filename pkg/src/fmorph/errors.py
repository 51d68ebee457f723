"""Exception hierarchy shared by every fmorph module."""


class FmorphError(Exception):
    """Base class for all errors raised by fmorph."""


# -- expression language -----------------------------------------------------

class ExprSyntaxError(FmorphError):
    """Parse failure; ``offset`` is a byte offset into the UTF-8 source."""

    def __init__(self, message, offset):
        super().__init__(f"{message} at byte {offset}")
        self.offset = offset


class UnknownFunction(ExprSyntaxError):
    pass


class UnbalancedParen(ExprSyntaxError):
    pass


class UnexpectedToken(ExprSyntaxError):
    pass


class UnboundVariable(FmorphError):
    def __init__(self, name):
        super().__init__(f"variable {name!r} is not bound")
        self.name = name


class DomainError(FmorphError):
    """A primitive was evaluated outside its domain.

    ``expr`` is the offending sub-expression.
    """

    def __init__(self, message, expr=None):
        super().__init__(message)
        self.expr = expr


# -- geometry ---------------------------------------------------------------

class OutOfDomain(FmorphError):
    def __init__(self, message, side="source"):
        super().__init__(message)
        self.side = side


class NotPositiveDefinite(FmorphError):
    pass


class WeightNotPositive(FmorphError):
    pass


class WeightMissing(FmorphError):
    pass


# -- map calculus -----------------------------------------------------------

class CriticalPoint(FmorphError):
    pass


class ChartMismatch(FmorphError):
    pass


# -- conformality -----------------------------------------------------------

class NotHWC(FmorphError):
    pass


class NotSubmersive(FmorphError):
    pass


class EqualDimensions(FmorphError):
    pass


class NotImmersion(FmorphError):
    pass


# -- verifier ---------------------------------------------------------------

class SamplerExhausted(FmorphError):
    pass


class PreconditionFailed(FmorphError):
    pass


# -- spin -------------------------------------------------------------------

class StepUnderflow(FmorphError):
    pass


class NonPositiveWeight(FmorphError):
    pass


class BlowUp(FmorphError):
    def __init__(self, message, step):
        super().__init__(message)
        self.step = step


# -- problem documents ------------------------------------------------------

class SchemaError(FmorphError):
    pass
