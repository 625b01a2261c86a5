"""Exception types shared across the package."""


class FlowcalcError(Exception):
    """Base class for all errors raised by flowcalc."""


class DeclarationConflictError(FlowcalcError):
    """A name was declared twice in the same context."""


class UndeclaredSymbolError(FlowcalcError):
    """A name was referenced that the context does not know."""


class KindMismatchError(FlowcalcError, TypeError):
    """Time and space expressions (or non-expressions) were mixed."""


class AutonomyError(FlowcalcError):
    """A function symbol was used against its declared autonomy."""


class UnsupportedConstructError(FlowcalcError):
    """The requested expression has no defined meaning (e.g. the flow
    of a nonautonomous function)."""


class InvalidVariableError(FlowcalcError):
    """An operation received something other than the variable kind it
    differentiates or substitutes by."""


class InvalidContextError(FlowcalcError):
    """A scenario builder was handed a context lacking required
    declarations."""


class UnsupportedOrderError(FlowcalcError):
    """A reduction identity beyond the configured maximum order was
    requested."""


class RewriteBudgetError(FlowcalcError):
    """A rewrite to fixpoint exceeded its step budget."""


class ParseError(FlowcalcError):
    """Syntax error in expression text; carries the offending position."""

    def __init__(self, message: str, position: int):
        super().__init__(f"{message} (at position {position})")
        self.position = position


class EvaluationError(FlowcalcError):
    """Base class for numeric-oracle failures."""


class UnboundSymbolError(EvaluationError):
    """Numeric evaluation met a symbol with no concrete binding."""


class DimensionMismatchError(EvaluationError):
    """Vectors or fields of inconsistent dimension were combined."""


class IntegrationError(EvaluationError):
    """The flow integrator failed to converge (step-halving check or
    non-finite state)."""
