"""Derivative calculus on expression trees.

The two derivatives work by structural recursion with the chain rule.
``differential`` is the Frechet derivative with respect to a space
variable: differentiating through the base of an application appends
the base's derivative as one extra slot (the derivative of a k-linear
map gains one argument), and differentiating through a slot replaces
that slot by its derivative.  ``t_derivative`` adds the time channel:
the flow satisfies d/dt E_F(t,u) = F(E_F(t,u)), and the same rule
lifted through k derivative slots is obtained by differentiating
F(E_F(t, .)) k times at a fresh base variable (Faa di Bruno done
mechanically rather than by per-order formulas).

All operations return canonical forms.
"""

from __future__ import annotations

import logging
from fractions import Fraction

from .errors import AutonomyError, InvalidVariableError, KindMismatchError
from .expressions import (
    FlowApplication,
    FunctionApplication,
    FunctionSymbol,
    NonAutonomousApplication,
    SpaceExpression,
    SpaceLinearCombination,
    SpaceVariable,
    TimeExpression,
    TimeLinearCombination,
    TimeVariable,
    apply,
    canonicalize,
    has_flow_applications,
    is_zero,
    linear_combine,
    space_zero,
    time_coefficients,
    _combine_space,
    _combine_time,
)

log = logging.getLogger(__name__)

# Internal bound variables; "@" cannot appear in declared names.
_FRESH_BASE = SpaceVariable("@base")
_FRESH_HOLE = SpaceVariable("@hole")


def _require_space_variable(x) -> SpaceVariable:
    if not isinstance(x, SpaceVariable):
        raise InvalidVariableError(f"expected a space variable, got {x!r}")
    return x


def _require_time_variable(t) -> TimeVariable:
    if not isinstance(t, TimeVariable):
        raise InvalidVariableError(f"expected a time variable, got {t!r}")
    return t


# ---------------------------------------------------------------------------
# Frechet differential

def differential(ex: SpaceExpression, x: SpaceVariable, v: SpaceExpression) -> SpaceExpression:
    """Frechet derivative of ``ex`` with respect to ``x`` in direction
    ``v``: d/de ex[x <- x + e v] at e = 0."""
    _require_space_variable(x)
    if not isinstance(v, SpaceExpression):
        raise KindMismatchError(f"direction must be a space expression, got {v!r}")
    if not isinstance(ex, SpaceExpression):
        raise KindMismatchError(f"expected a space expression, got {ex!r}")
    return _differential(ex, x, v, {})


def _differential(ex, x, v, memo):
    hit = memo.get(ex)
    if hit is not None:
        return hit
    t = type(ex)
    if t is SpaceVariable:
        result = canonicalize(v) if ex.name == x.name else space_zero()
    elif t is SpaceLinearCombination:
        result = _combine_space(
            (_differential(term, x, v, memo), c) for term, c in ex.terms
        )
    elif t is FunctionApplication:
        parts = []
        db = _differential(ex.base, x, v, memo)
        if not _is_zero_canonical(db):
            parts.append(
                (FunctionApplication(ex.symbol, ex.base, ex.slots + (db,)), 1)
            )
        for i, slot in enumerate(ex.slots):
            ds = _differential(slot, x, v, memo)
            if not _is_zero_canonical(ds):
                parts.append((_replace_slot(ex, i, ds), 1))
        result = _combine_space(parts) if parts else space_zero()
    elif t is FlowApplication:
        parts = []
        db = _differential(ex.base, x, v, memo)
        if not _is_zero_canonical(db):
            parts.append(
                (FlowApplication(ex.symbol, ex.time, ex.base, ex.slots + (db,)), 1)
            )
        for i, slot in enumerate(ex.slots):
            ds = _differential(slot, x, v, memo)
            if not _is_zero_canonical(ds):
                parts.append((_replace_slot(ex, i, ds), 1))
        result = _combine_space(parts) if parts else space_zero()
    elif t is NonAutonomousApplication:
        parts = []
        db = _differential(ex.base, x, v, memo)
        if not _is_zero_canonical(db):
            parts.append(
                (
                    NonAutonomousApplication(
                        ex.symbol, ex.t_order, ex.time, ex.base, ex.slots + (db,)
                    ),
                    1,
                )
            )
        for i, slot in enumerate(ex.slots):
            ds = _differential(slot, x, v, memo)
            if not _is_zero_canonical(ds):
                parts.append((_replace_slot(ex, i, ds), 1))
        result = _combine_space(parts) if parts else space_zero()
    else:
        raise KindMismatchError(f"expected a space expression, got {ex!r}")
    memo[ex] = result
    return result


def _is_zero_canonical(ex):
    return type(ex) is SpaceLinearCombination and not ex.terms


def _replace_slot(node, index, new_slot):
    slots = node.slots[:index] + (new_slot,) + node.slots[index + 1:]
    t = type(node)
    if t is FunctionApplication:
        return FunctionApplication(node.symbol, node.base, slots)
    if t is FlowApplication:
        return FlowApplication(node.symbol, node.time, node.base, slots)
    return NonAutonomousApplication(node.symbol, node.t_order, node.time, node.base, slots)


# ---------------------------------------------------------------------------
# Time derivative

def t_derivative(ex: SpaceExpression, t: TimeVariable) -> SpaceExpression:
    """Derivative of ``ex`` with respect to the time variable ``t``."""
    _require_time_variable(t)
    if not isinstance(ex, SpaceExpression):
        raise KindMismatchError(f"expected a space expression, got {ex!r}")
    return _t_derivative(ex, t.name, {})


def _t_derivative(ex, tname, memo):
    hit = memo.get(ex)
    if hit is not None:
        return hit
    t = type(ex)
    if t is SpaceVariable:
        result = space_zero()
    elif t is SpaceLinearCombination:
        result = _combine_space(
            (_t_derivative(term, tname, memo), c) for term, c in ex.terms
        )
    elif t is FunctionApplication:
        parts = []
        db = _t_derivative(ex.base, tname, memo)
        if not _is_zero_canonical(db):
            parts.append(
                (FunctionApplication(ex.symbol, ex.base, ex.slots + (db,)), 1)
            )
        _slot_channels(ex, tname, memo, parts)
        result = _combine_space(parts) if parts else space_zero()
    elif t is FlowApplication:
        parts = []
        coeff = time_coefficients(ex.time).get(tname, Fraction(0))
        if coeff:
            parts.append((_flow_time_channel(ex), coeff))
        db = _t_derivative(ex.base, tname, memo)
        if not _is_zero_canonical(db):
            parts.append(
                (FlowApplication(ex.symbol, ex.time, ex.base, ex.slots + (db,)), 1)
            )
        _slot_channels(ex, tname, memo, parts)
        result = _combine_space(parts) if parts else space_zero()
    elif t is NonAutonomousApplication:
        parts = []
        coeff = time_coefficients(ex.time).get(tname, Fraction(0))
        if coeff:
            parts.append(
                (
                    NonAutonomousApplication(
                        ex.symbol, ex.t_order + 1, ex.time, ex.base, ex.slots
                    ),
                    coeff,
                )
            )
        db = _t_derivative(ex.base, tname, memo)
        if not _is_zero_canonical(db):
            parts.append(
                (
                    NonAutonomousApplication(
                        ex.symbol, ex.t_order, ex.time, ex.base, ex.slots + (db,)
                    ),
                    1,
                )
            )
        _slot_channels(ex, tname, memo, parts)
        result = _combine_space(parts) if parts else space_zero()
    else:
        raise KindMismatchError(f"expected a space expression, got {ex!r}")
    memo[ex] = result
    return result


def _slot_channels(ex, tname, memo, parts):
    for i, slot in enumerate(ex.slots):
        ds = _t_derivative(slot, tname, memo)
        if not _is_zero_canonical(ds):
            parts.append((_replace_slot(ex, i, ds), 1))


def _flow_time_channel(node: FlowApplication) -> SpaceExpression:
    """d/dtau of d2^k E_F(tau, b)(d1..dk): the flow equation
    d/dtau E = F(E), pushed through the k slots by differentiating
    F(E_F(tau, .)) k times at a fresh base variable."""
    if not node.slots:
        return FunctionApplication(
            node.symbol, FlowApplication(node.symbol, node.time, node.base)
        )
    ex = FunctionApplication(
        node.symbol, FlowApplication(node.symbol, node.time, _FRESH_BASE)
    )
    for d in node.slots:
        ex = differential(ex, _FRESH_BASE, d)
    return substitute_var(ex, _FRESH_BASE, node.base)


# ---------------------------------------------------------------------------
# Multilinear expansion

def expand(ex: SpaceExpression) -> SpaceExpression:
    """Distribute linear combinations out of derivative slots.

    A slot holding a combination splits the node into the combination
    of nodes, one per term; symmetric cross terms merge with their
    multinomial multiplicity during canonicalization.  Bases are not
    distributed (F is not linear in its base).
    """
    if not isinstance(ex, SpaceExpression):
        raise KindMismatchError(f"expected a space expression, got {ex!r}")
    return _expand(canonicalize(ex), {})


def _expand(ex, memo):
    hit = memo.get(ex)
    if hit is not None:
        return hit
    t = type(ex)
    if t is SpaceVariable:
        result = ex
    elif t is SpaceLinearCombination:
        result = _combine_space((_expand(term, memo), c) for term, c in ex.terms)
    else:
        base = _expand(ex.base, memo)
        slots = [_expand(s, memo) for s in ex.slots]
        choices = []
        for s in slots:
            if type(s) is SpaceLinearCombination:
                choices.append(s.terms)
            else:
                choices.append(((s, Fraction(1)),))
        parts = []
        for combo, coeff in _product(choices):
            parts.append((_rebuild(ex, base, combo), coeff))
        result = _combine_space(parts) if parts else canonicalize(_rebuild(ex, base, ()))
    memo[ex] = result
    return result


def _product(choices):
    """All slot selections with their coefficient products."""
    if not choices:
        yield (), Fraction(1)
        return
    head, *rest = choices
    for tail, tail_coeff in _product(rest):
        for term, c in head:
            yield (term,) + tail, c * tail_coeff


def _rebuild(node, base, slots):
    t = type(node)
    if t is FunctionApplication:
        return FunctionApplication(node.symbol, base, slots)
    if t is FlowApplication:
        return FlowApplication(node.symbol, node.time, base, slots)
    return NonAutonomousApplication(node.symbol, node.t_order, node.time, base, slots)


# ---------------------------------------------------------------------------
# Substitution

def substitute_var(ex, x, repl):
    """Replace every occurrence of the variable ``x`` by ``repl``.

    Both a time variant (x: TimeVariable, repl: TimeExpression; applied
    inside flow and nonautonomous time arguments as well) and a space
    variant exist; kinds must match.
    """
    if isinstance(x, SpaceVariable):
        if not isinstance(repl, SpaceExpression):
            raise KindMismatchError(
                f"replacement for space variable must be a space expression, got {repl!r}"
            )
        if not isinstance(ex, SpaceExpression):
            raise KindMismatchError(f"expected a space expression, got {ex!r}")
        return _substitute_space_var(ex, x.name, repl, {})
    if isinstance(x, TimeVariable):
        if not isinstance(repl, TimeExpression):
            raise KindMismatchError(
                f"replacement for time variable must be a time expression, got {repl!r}"
            )
        if isinstance(ex, TimeExpression):
            return _substitute_time_in_time(ex, x.name, repl)
        if isinstance(ex, SpaceExpression):
            return _substitute_time_var(ex, x.name, repl, {})
        raise KindMismatchError(f"expected an expression, got {ex!r}")
    raise InvalidVariableError(f"expected a variable, got {x!r}")


def _substitute_space_var(ex, name, repl, memo):
    hit = memo.get(ex)
    if hit is not None:
        return hit
    t = type(ex)
    if t is SpaceVariable:
        result = canonicalize(repl) if ex.name == name else ex
    elif t is SpaceLinearCombination:
        result = _combine_space(
            (_substitute_space_var(term, name, repl, memo), c) for term, c in ex.terms
        )
    else:
        base = _substitute_space_var(ex.base, name, repl, memo)
        slots = tuple(_substitute_space_var(s, name, repl, memo) for s in ex.slots)
        result = canonicalize(_rebuild(ex, base, slots))
    memo[ex] = result
    return result


def _substitute_time_in_time(tex, name, repl):
    coeffs = time_coefficients(tex)
    c = coeffs.pop(name, Fraction(0))
    parts = [(TimeVariable(n), k) for n, k in coeffs.items()]
    if c:
        parts.append((repl, c))
    return _combine_time(parts) if parts else canonicalize(TimeLinearCombination(()))


def _substitute_time_var(ex, name, repl, memo):
    hit = memo.get(ex)
    if hit is not None:
        return hit
    t = type(ex)
    if t is SpaceVariable:
        result = ex
    elif t is SpaceLinearCombination:
        result = _combine_space(
            (_substitute_time_var(term, name, repl, memo), c) for term, c in ex.terms
        )
    elif t is FunctionApplication:
        base = _substitute_time_var(ex.base, name, repl, memo)
        slots = tuple(_substitute_time_var(s, name, repl, memo) for s in ex.slots)
        result = canonicalize(FunctionApplication(ex.symbol, base, slots))
    else:
        time = _substitute_time_in_time(ex.time, name, repl)
        base = _substitute_time_var(ex.base, name, repl, memo)
        slots = tuple(_substitute_time_var(s, name, repl, memo) for s in ex.slots)
        if t is FlowApplication:
            result = canonicalize(FlowApplication(ex.symbol, time, base, slots))
        else:
            result = canonicalize(
                NonAutonomousApplication(ex.symbol, ex.t_order, time, base, slots)
            )
    memo[ex] = result
    return result


def substitute_fun(ex: SpaceExpression, symbol: FunctionSymbol, repl: SpaceExpression,
                   hole: SpaceVariable) -> SpaceExpression:
    """Replace the operator ``symbol`` by the expression ``repl`` seen
    as a function of ``hole``.

    Every application symbol^(k)(b)(d1..dk) becomes the k-fold
    differential of ``repl`` with respect to ``hole`` in directions
    d1..dk, with ``hole`` then replaced by b.  Flow applications of
    ``symbol`` have no closed-form counterpart and are left untouched;
    rewrite them away first (see rewrite.to_flow_derivative) when they
    must not survive.  Use :func:`flowcalc.expressions.has_flow_applications`
    to detect leftovers.
    """
    if not isinstance(symbol, FunctionSymbol):
        raise KindMismatchError(f"expected a function symbol, got {symbol!r}")
    if not symbol.autonomous:
        raise AutonomyError("substitute_fun applies to autonomous symbols only")
    _require_space_variable(hole)
    if not isinstance(repl, SpaceExpression):
        raise KindMismatchError(f"replacement must be a space expression, got {repl!r}")
    result = _substitute_fun(canonicalize(ex), symbol, repl, hole, {})
    if has_flow_applications(result, symbol):
        log.debug(
            "substitute_fun: flow applications of %s remain untouched", symbol.name
        )
    return result


def _substitute_fun(ex, symbol, repl, hole, memo):
    hit = memo.get(ex)
    if hit is not None:
        return hit
    t = type(ex)
    if t is SpaceVariable:
        result = ex
    elif t is SpaceLinearCombination:
        result = _combine_space(
            (_substitute_fun(term, symbol, repl, hole, memo), c) for term, c in ex.terms
        )
    elif t is FunctionApplication and ex.symbol == symbol:
        base = _substitute_fun(ex.base, symbol, repl, hole, memo)
        slots = tuple(_substitute_fun(s, symbol, repl, hole, memo) for s in ex.slots)
        cur = repl
        for d in slots:
            cur = differential(cur, hole, d)
        result = substitute_var(cur, hole, base)
    else:
        base = _substitute_fun(ex.base, symbol, repl, hole, memo)
        slots = tuple(_substitute_fun(s, symbol, repl, hole, memo) for s in ex.slots)
        result = canonicalize(_rebuild(ex, base, slots))
    memo[ex] = result
    return result


# ---------------------------------------------------------------------------
# Commutators

def commutator(a: FunctionSymbol, b: FunctionSymbol, base: SpaceExpression) -> SpaceExpression:
    """Lie bracket of the vector fields a and b, evaluated at ``base``:
    a'(base).b(base) - b'(base).a(base)."""
    _check_autonomous(a)
    _check_autonomous(b)
    if not isinstance(base, SpaceExpression):
        raise KindMismatchError(f"expected a space expression, got {base!r}")
    return linear_combine(
        [
            (FunctionApplication(a, base, (FunctionApplication(b, base),)), 1),
            (FunctionApplication(b, base, (FunctionApplication(a, base),)), -1),
        ]
    )


def double_commutator(a: FunctionSymbol, b: FunctionSymbol, c: FunctionSymbol,
                      base: SpaceExpression) -> SpaceExpression:
    """Nested bracket [a, [b, c]] evaluated at ``base``."""
    _check_autonomous(a)
    _check_autonomous(b)
    _check_autonomous(c)
    if not isinstance(base, SpaceExpression):
        raise KindMismatchError(f"expected a space expression, got {base!r}")
    inner = commutator(b, c, _FRESH_HOLE)
    outer = linear_combine(
        [
            (FunctionApplication(a, _FRESH_HOLE, (inner,)), 1),
            (differential(inner, _FRESH_HOLE, FunctionApplication(a, _FRESH_HOLE)), -1),
        ]
    )
    return substitute_var(outer, _FRESH_HOLE, base)


def _check_autonomous(symbol):
    if not isinstance(symbol, FunctionSymbol):
        raise KindMismatchError(f"expected a function symbol, got {symbol!r}")
    if not symbol.autonomous:
        raise AutonomyError(
            f"commutators are defined for autonomous symbols only, got {symbol.name}"
        )
