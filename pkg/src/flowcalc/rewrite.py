"""Rewriting by the fundamental identity of flows.

For an autonomous field F with flow E_F, differentiating
E_F(t, u) in t and in u gives the seed identity

    F(E_F(t,u)) = d2 E_F(t,u) . F(u).

:func:`to_flow_derivative` applies it left to right,
:func:`to_flow_composition` right to left.  Differentiating the seed
k-1 times with respect to u produces an identity whose unique
highest-order term is d2^k E_F(t,u)(F(u), v2, ..., vk);
:func:`reduce_order` rewrites every subterm of that shape by the
solved identity, to fixpoint.  Identities are generated on demand by
the calculus itself (one differentiation per order) and memoized, so
any order is available up to a configurable cap.

All rewrites walk innermost-first and return canonical forms.
"""

from __future__ import annotations

import logging

from .calculus import differential, substitute_var
from .errors import KindMismatchError, RewriteBudgetError, UnsupportedOrderError
from .expressions import (
    FlowApplication,
    FunctionApplication,
    FunctionSymbol,
    NonAutonomousApplication,
    SpaceExpression,
    SpaceLinearCombination,
    SpaceVariable,
    TimeVariable,
    canonicalize,
    linear_combine,
    _combine_space,
)

log = logging.getLogger(__name__)

DEFAULT_MAX_IDENTITY_ORDER = 8
DEFAULT_STEP_BUDGET = 10**6

# Formal placeholders used in memoized identity templates; declared
# names can never collide with "@".
_F = FunctionSymbol("@F", autonomous=True)
_T = TimeVariable("@t")
_U = SpaceVariable("@u")

# Order -> solved right-hand side of the identity, in terms of
# _F, _T, _U and direction placeholders @v2..@vk.  Entries are
# immutable and writes are atomic, so concurrent readers are safe.
_identity_rhs: dict[int, SpaceExpression] = {}


def _direction_placeholders(order: int) -> tuple[SpaceVariable, ...]:
    return tuple(SpaceVariable(f"@v{i}") for i in range(2, order + 1))


def reduction_identity_rhs(order: int) -> SpaceExpression:
    """Solved form of d2^order E(t,u)(F(u), @v2..@v{order}) in template
    variables; generated by repeated differentiation of the seed
    identity and memoized."""
    if order < 1:
        raise UnsupportedOrderError(f"identity order must be >= 1, got {order}")
    rhs = _identity_rhs.get(order)
    if rhs is not None:
        return rhs
    seed = linear_combine(
        [
            (FunctionApplication(_F, FlowApplication(_F, _T, _U)), 1),
            (FlowApplication(_F, _T, _U, (FunctionApplication(_F, _U),)), -1),
        ]
    )
    identity = seed
    dirs = _direction_placeholders(order)
    for v in dirs:
        identity = differential(identity, _U, v)
    # The highest-order term occurs exactly once, with coefficient -1:
    # adding it back leaves the solved right-hand side.
    highest = FlowApplication(_F, _T, _U, (FunctionApplication(_F, _U),) + dirs)
    rhs = canonicalize(identity + highest)
    _identity_rhs[order] = rhs
    return rhs


def _instantiate(order, symbol, time, base, directions):
    rhs = reduction_identity_rhs(order)
    rhs = _rename_symbol(rhs, _F, symbol, {})
    rhs = substitute_var(rhs, _T, time)
    rhs = substitute_var(rhs, _U, base)
    for placeholder, actual in zip(_direction_placeholders(order), directions):
        rhs = substitute_var(rhs, placeholder, actual)
    return rhs


def _rename_symbol(ex, old, new, memo):
    """Structural replacement of a function symbol, including flow
    heads (only valid for formal placeholders)."""
    hit = memo.get(ex)
    if hit is not None:
        return hit
    t = type(ex)
    if t is SpaceVariable:
        result = ex
    elif t is SpaceLinearCombination:
        result = SpaceLinearCombination(
            tuple((_rename_symbol(term, old, new, memo), c) for term, c in ex.terms),
            _canonical=False,
        )
    elif t is FunctionApplication:
        result = FunctionApplication(
            new if ex.symbol == old else ex.symbol,
            _rename_symbol(ex.base, old, new, memo),
            tuple(_rename_symbol(s, old, new, memo) for s in ex.slots),
        )
    elif t is FlowApplication:
        result = FlowApplication(
            new if ex.symbol == old else ex.symbol,
            ex.time,
            _rename_symbol(ex.base, old, new, memo),
            tuple(_rename_symbol(s, old, new, memo) for s in ex.slots),
        )
    else:
        result = NonAutonomousApplication(
            ex.symbol,
            ex.t_order,
            ex.time,
            _rename_symbol(ex.base, old, new, memo),
            tuple(_rename_symbol(s, old, new, memo) for s in ex.slots),
        )
    memo[ex] = result
    return result


class _Budget:
    __slots__ = ("left",)

    def __init__(self, steps):
        self.left = steps

    def spend(self):
        self.left -= 1
        if self.left < 0:
            raise RewriteBudgetError("rewrite step budget exhausted")


def to_flow_derivative(ex: SpaceExpression) -> SpaceExpression:
    """Rewrite every F(E_F(t,u)) into d2 E_F(t,u) . F(u), innermost
    first, to fixpoint."""
    budget = _Budget(DEFAULT_STEP_BUDGET)
    return _walk_forward(canonicalize(_as_space(ex)), {}, budget)


def _walk_forward(ex, memo, budget):
    hit = memo.get(ex)
    if hit is not None:
        return hit
    t = type(ex)
    if t is SpaceVariable:
        result = ex
    elif t is SpaceLinearCombination:
        result = _combine_space(
            (_walk_forward(term, memo, budget), c) for term, c in ex.terms
        )
    else:
        base = _walk_forward(ex.base, memo, budget)
        slots = tuple(_walk_forward(s, memo, budget) for s in ex.slots)
        if (
            t is FunctionApplication
            and not slots
            and type(base) is FlowApplication
            and base.symbol == ex.symbol
            and not base.slots
        ):
            budget.spend()
            field_at_base = _walk_forward(
                canonicalize(FunctionApplication(ex.symbol, base.base)), memo, budget
            )
            result = canonicalize(
                FlowApplication(ex.symbol, base.time, base.base, (field_at_base,))
            )
        else:
            result = canonicalize(_rebuild_node(ex, base, slots))
    memo[ex] = result
    return result


def to_flow_composition(ex: SpaceExpression) -> SpaceExpression:
    """Rewrite every d2 E_F(t,u) . F(u) into F(E_F(t,u)), innermost
    first, to fixpoint (inverse of :func:`to_flow_derivative`)."""
    budget = _Budget(DEFAULT_STEP_BUDGET)
    return _walk_backward(canonicalize(_as_space(ex)), {}, budget)


def _walk_backward(ex, memo, budget):
    hit = memo.get(ex)
    if hit is not None:
        return hit
    t = type(ex)
    if t is SpaceVariable:
        result = ex
    elif t is SpaceLinearCombination:
        result = _combine_space(
            (_walk_backward(term, memo, budget), c) for term, c in ex.terms
        )
    else:
        base = _walk_backward(ex.base, memo, budget)
        slots = tuple(_walk_backward(s, memo, budget) for s in ex.slots)
        if (
            t is FlowApplication
            and len(slots) == 1
            and slots[0] == FunctionApplication(ex.symbol, base, (), _canonical=True)
        ):
            budget.spend()
            result = canonicalize(
                FunctionApplication(
                    ex.symbol, FlowApplication(ex.symbol, ex.time, base)
                )
            )
        else:
            result = canonicalize(_rebuild_node(ex, base, slots))
    memo[ex] = result
    return result


def reduce_order(ex: SpaceExpression, *,
                 max_identity_order: int = DEFAULT_MAX_IDENTITY_ORDER,
                 step_budget: int = DEFAULT_STEP_BUDGET) -> SpaceExpression:
    """Rewrite every d2^k E_F(t,b)(F(b), d2..dk) via the order-k
    identity, innermost first, to fixpoint.

    Raises UnsupportedOrderError when a matching subterm needs an
    identity beyond ``max_identity_order`` and RewriteBudgetError when
    the rewrite does not reach a fixpoint within ``step_budget`` steps.
    """
    budget = _Budget(step_budget)
    return _walk_reduce(canonicalize(_as_space(ex)), {}, max_identity_order, budget)


def _walk_reduce(ex, memo, max_order, budget):
    hit = memo.get(ex)
    if hit is not None:
        return hit
    t = type(ex)
    if t is SpaceVariable:
        result = ex
    elif t is SpaceLinearCombination:
        result = _combine_space(
            (_walk_reduce(term, memo, max_order, budget), c) for term, c in ex.terms
        )
    else:
        base = _walk_reduce(ex.base, memo, max_order, budget)
        slots = tuple(_walk_reduce(s, memo, max_order, budget) for s in ex.slots)
        if t is FlowApplication and slots:
            probe = FunctionApplication(ex.symbol, base, (), _canonical=True)
            matches = [i for i, s in enumerate(slots) if s == probe]
            if matches:
                order = len(slots)
                if order > max_order:
                    raise UnsupportedOrderError(
                        f"reduction needs identity order {order} "
                        f"> max_identity_order {max_order}"
                    )
                if len(matches) > 1:
                    log.debug(
                        "reduce_order: slot %s occurs %d times; reducing one "
                        "occurrence per step", probe, len(matches)
                    )
                budget.spend()
                rest = slots[: matches[0]] + slots[matches[0] + 1:]
                rhs = _instantiate(order, ex.symbol, ex.time, base, rest)
                result = _walk_reduce(rhs, memo, max_order, budget)
            else:
                result = canonicalize(_rebuild_node(ex, base, slots))
        else:
            result = canonicalize(_rebuild_node(ex, base, slots))
    memo[ex] = result
    return result


def _rebuild_node(node, base, slots):
    t = type(node)
    if t is FunctionApplication:
        return FunctionApplication(node.symbol, base, slots)
    if t is FlowApplication:
        return FlowApplication(node.symbol, node.time, base, slots)
    return NonAutonomousApplication(node.symbol, node.t_order, node.time, node.base if base is None else base, slots)


def _as_space(ex):
    if not isinstance(ex, SpaceExpression):
        raise KindMismatchError(f"expected a space expression, got {ex!r}")
    return ex
