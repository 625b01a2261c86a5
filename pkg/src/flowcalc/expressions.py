"""Expression trees for time- and space-valued symbolic expressions.

Two families of immutable tree nodes live here.  Time expressions are
exact-rational linear combinations of declared time variables.  Space
expressions describe points and directions: variables, linear
combinations, applications of named operators with derivative slots,
flow applications (the exact solution map of u' = F(u), with optional
derivative slots of the initial value), and nonautonomous applications
carrying an additional time-derivative order.

Derivative slots are arguments of symmetric multilinear maps: an
application with k slots denotes the k-th Frechet derivative applied to
those k directions.

Every expression has a unique canonical form (see :func:`canonicalize`)
on which equality, ordering, and zero-detection are defined: linear
combinations are flat, merged, free of zero coefficients and sorted;
slots are sorted; an application with a zero slot is zero by
multilinearity; the empty combination is the one and only zero.

Nodes cache their hash eagerly and their sort key lazily, so repeated
merging and sorting of large sums stays cheap.  Instances are immutable
by convention: nothing mutates a node after construction except the two
caches.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Iterable, Iterator, Sequence, Union

from .errors import AutonomyError, KindMismatchError, UnsupportedConstructError

Rational = Union[int, Fraction]

_RANK_VARIABLE = 0
_RANK_FUNCTION_APP = 1
_RANK_FLOW_APP = 2
_RANK_NONAUTONOMOUS_APP = 3
_RANK_COMBINATION = 4


class FunctionSymbol:
    """A declared named operator, autonomous or nonautonomous."""

    __slots__ = ("name", "autonomous", "_hash")

    def __init__(self, name: str, autonomous: bool = True):
        self.name = name
        self.autonomous = autonomous
        self._hash = hash((FunctionSymbol, name, autonomous))

    def __repr__(self):
        kind = "autonomous" if self.autonomous else "nonautonomous"
        return f"FunctionSymbol({self.name}, {kind})"

    def __hash__(self):
        return self._hash

    def __eq__(self, other):
        if self is other:
            return True
        if not isinstance(other, FunctionSymbol):
            return False
        return self.name == other.name and self.autonomous == other.autonomous

    def __call__(self, *args):
        """Build an application the way the notation reads.

        Autonomous F: ``F(base, d1, ..., dk)`` is the k-th derivative of
        F at ``base`` applied to the directions ``di``.  Nonautonomous
        S: ``S(time, base, d1, ..., dk)``.
        """
        if self.autonomous:
            if not args:
                raise KindMismatchError(f"{self.name}() needs a base argument")
            if isinstance(args[0], TimeExpression):
                raise AutonomyError(
                    f"autonomous symbol {self.name} takes no time argument"
                )
            return apply(self, args[0], *args[1:])
        if len(args) < 2:
            raise KindMismatchError(
                f"nonautonomous symbol {self.name} needs (time, base) arguments"
            )
        return nonautonomous_apply(self, 0, args[0], args[1], *args[2:])


def _as_fraction(value: Rational) -> Fraction:
    if isinstance(value, Fraction):
        return value
    if isinstance(value, int):
        return Fraction(value)
    raise KindMismatchError(f"coefficients must be rational, got {value!r}")


class _Expression:
    """Shared cache slots and hashing for all nodes."""

    __slots__ = ("_hash", "_key", "_canonical")

    def __hash__(self):
        return self._hash

    def __str__(self):
        from .render import to_text

        return to_text(self)

    def __repr__(self):
        return self.__str__()


class TimeExpression(_Expression):
    """Base class of time-valued expressions."""

    __slots__ = ()

    def __add__(self, other):
        if isinstance(other, _Expression):
            return linear_combine([(self, 1), (other, 1)])
        return NotImplemented

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, _Expression):
            return linear_combine([(self, 1), (other, -1)])
        return NotImplemented

    def __rsub__(self, other):
        if isinstance(other, _Expression):
            return linear_combine([(other, 1), (self, -1)])
        return NotImplemented

    def __neg__(self):
        return linear_combine([(self, -1)])

    def __mul__(self, factor):
        if isinstance(factor, (int, Fraction)):
            return linear_combine([(self, factor)])
        return NotImplemented

    __rmul__ = __mul__

    def __truediv__(self, divisor):
        if isinstance(divisor, (int, Fraction)):
            return linear_combine([(self, Fraction(1, 1) / divisor)])
        return NotImplemented


class TimeVariable(TimeExpression):
    __slots__ = ("name",)

    def __init__(self, name: str):
        self.name = name
        self._hash = hash((TimeVariable, name))
        self._key = None
        self._canonical = True

    def __eq__(self, other):
        if self is other:
            return True
        return type(other) is TimeVariable and other.name == self.name

    __hash__ = _Expression.__hash__


class TimeLinearCombination(TimeExpression):
    __slots__ = ("terms",)

    def __init__(self, terms, _canonical=False):
        self.terms = tuple((ex, _as_fraction(c)) for ex, c in terms)
        self._hash = hash(
            (TimeLinearCombination, tuple((hash(ex), c) for ex, c in self.terms))
        )
        self._key = None
        self._canonical = _canonical

    def __eq__(self, other):
        if self is other:
            return True
        if type(other) is not TimeLinearCombination or other._hash != self._hash:
            return False
        return self.terms == other.terms

    __hash__ = _Expression.__hash__


class SpaceExpression(_Expression):
    """Base class of space-valued expressions."""

    __slots__ = ()

    __add__ = TimeExpression.__add__
    __radd__ = TimeExpression.__add__
    __sub__ = TimeExpression.__sub__
    __rsub__ = TimeExpression.__rsub__
    __neg__ = TimeExpression.__neg__
    __mul__ = TimeExpression.__mul__
    __rmul__ = TimeExpression.__mul__
    __truediv__ = TimeExpression.__truediv__


class SpaceVariable(SpaceExpression):
    __slots__ = ("name",)

    def __init__(self, name: str):
        self.name = name
        self._hash = hash((SpaceVariable, name))
        self._key = None
        self._canonical = True

    def __eq__(self, other):
        if self is other:
            return True
        return type(other) is SpaceVariable and other.name == self.name

    __hash__ = _Expression.__hash__


class SpaceLinearCombination(SpaceExpression):
    __slots__ = ("terms",)

    def __init__(self, terms, _canonical=False):
        self.terms = tuple((ex, _as_fraction(c)) for ex, c in terms)
        self._hash = hash(
            (SpaceLinearCombination, tuple((hash(ex), c) for ex, c in self.terms))
        )
        self._key = None
        self._canonical = _canonical

    def __eq__(self, other):
        if self is other:
            return True
        if type(other) is not SpaceLinearCombination or other._hash != self._hash:
            return False
        return self.terms == other.terms

    __hash__ = _Expression.__hash__


class FunctionApplication(SpaceExpression):
    """F^(k)(base)(d1, ..., dk) for an autonomous symbol F."""

    __slots__ = ("symbol", "base", "slots")

    def __init__(self, symbol, base, slots=(), _canonical=False):
        self.symbol = symbol
        self.base = base
        self.slots = tuple(slots)
        self._hash = hash(
            (FunctionApplication, symbol, hash(base), tuple(map(hash, self.slots)))
        )
        self._key = None
        self._canonical = _canonical

    def __eq__(self, other):
        if self is other:
            return True
        if type(other) is not FunctionApplication or other._hash != self._hash:
            return False
        return (
            self.symbol == other.symbol
            and self.base == other.base
            and self.slots == other.slots
        )

    __hash__ = _Expression.__hash__


class FlowApplication(SpaceExpression):
    """d2^k E_F(time, base)(d1, ..., dk): derivatives of the exact flow
    of u' = F(u) with respect to the initial value."""

    __slots__ = ("symbol", "time", "base", "slots")

    def __init__(self, symbol, time, base, slots=(), _canonical=False):
        self.symbol = symbol
        self.time = time
        self.base = base
        self.slots = tuple(slots)
        self._hash = hash(
            (FlowApplication, symbol, hash(time), hash(base), tuple(map(hash, self.slots)))
        )
        self._key = None
        self._canonical = _canonical

    def __eq__(self, other):
        if self is other:
            return True
        if type(other) is not FlowApplication or other._hash != self._hash:
            return False
        return (
            self.symbol == other.symbol
            and self.time == other.time
            and self.base == other.base
            and self.slots == other.slots
        )

    __hash__ = _Expression.__hash__


class NonAutonomousApplication(SpaceExpression):
    """d1^m d2^k S(time, base)(d1, ..., dk) for a nonautonomous S."""

    __slots__ = ("symbol", "t_order", "time", "base", "slots")

    def __init__(self, symbol, t_order, time, base, slots=(), _canonical=False):
        self.symbol = symbol
        self.t_order = t_order
        self.time = time
        self.base = base
        self.slots = tuple(slots)
        self._hash = hash(
            (
                NonAutonomousApplication,
                symbol,
                t_order,
                hash(time),
                hash(base),
                tuple(map(hash, self.slots)),
            )
        )
        self._key = None
        self._canonical = _canonical

    def __eq__(self, other):
        if self is other:
            return True
        if type(other) is not NonAutonomousApplication or other._hash != self._hash:
            return False
        return (
            self.symbol == other.symbol
            and self.t_order == other.t_order
            and self.time == other.time
            and self.base == other.base
            and self.slots == other.slots
        )

    __hash__ = _Expression.__hash__


Expression = Union[TimeExpression, SpaceExpression]

TIME_ZERO = TimeLinearCombination((), _canonical=True)
SPACE_ZERO = SpaceLinearCombination((), _canonical=True)


# ---------------------------------------------------------------------------
# Constructors

def apply(symbol: FunctionSymbol, base: SpaceExpression, *slots: SpaceExpression) -> FunctionApplication:
    """F^(k)(base)(slots); k = number of slots, k = 0 is plain F(base).

    No normalization happens here beyond argument checking; call
    :func:`canonicalize` for the normal form.
    """
    if not isinstance(symbol, FunctionSymbol):
        raise KindMismatchError(f"expected a function symbol, got {symbol!r}")
    if not symbol.autonomous:
        raise AutonomyError(
            f"nonautonomous symbol {symbol.name} needs a time argument; "
            "use nonautonomous_apply"
        )
    _check_space(base)
    for s in slots:
        _check_space(s)
    return FunctionApplication(symbol, base, slots)


def flow(symbol: FunctionSymbol, time: TimeExpression, base: SpaceExpression,
         *slots: SpaceExpression) -> FlowApplication:
    """d2^k E_F(time, base)(slots): the flow of u' = F(u) and its
    derivatives with respect to the initial value."""
    if not isinstance(symbol, FunctionSymbol):
        raise KindMismatchError(f"expected a function symbol, got {symbol!r}")
    if not symbol.autonomous:
        raise UnsupportedConstructError(
            f"the flow of a nonautonomous symbol ({symbol.name}) is not defined"
        )
    _check_time(time)
    _check_space(base)
    for s in slots:
        _check_space(s)
    return FlowApplication(symbol, time, base, slots)


def nonautonomous_apply(symbol: FunctionSymbol, t_order: int, time: TimeExpression,
                        base: SpaceExpression, *slots: SpaceExpression) -> NonAutonomousApplication:
    """d1^t_order d2^k S(time, base)(slots) for nonautonomous S."""
    if not isinstance(symbol, FunctionSymbol):
        raise KindMismatchError(f"expected a function symbol, got {symbol!r}")
    if symbol.autonomous:
        raise AutonomyError(
            f"autonomous symbol {symbol.name} cannot carry a d1 derivative order"
        )
    if not isinstance(t_order, int) or t_order < 0:
        raise KindMismatchError(f"t_order must be a nonnegative integer, got {t_order!r}")
    _check_time(time)
    _check_space(base)
    for s in slots:
        _check_space(s)
    return NonAutonomousApplication(symbol, t_order, time, base, slots)


def _check_space(ex):
    if not isinstance(ex, SpaceExpression):
        raise KindMismatchError(f"expected a space expression, got {ex!r}")


def _check_time(ex):
    if not isinstance(ex, TimeExpression):
        raise KindMismatchError(f"expected a time expression, got {ex!r}")


def linear_combine(terms: Iterable[tuple[Expression, Rational]]) -> Expression:
    """Canonical linear combination of (expression, coefficient) pairs.

    All expressions must be of one kind (all time or all space);
    coefficient arithmetic is exact.  The result is the canonical flat
    form; cancellation to the empty combination yields zero.
    """
    terms = list(terms)
    if not terms:
        raise KindMismatchError(
            "cannot combine an empty term list; use time_zero()/space_zero()"
        )
    first = terms[0][0]
    if isinstance(first, TimeExpression):
        for ex, _ in terms:
            if not isinstance(ex, TimeExpression):
                raise KindMismatchError(f"mixed time and space terms: {ex!r}")
        return _combine_time(terms)
    if isinstance(first, SpaceExpression):
        for ex, _ in terms:
            if not isinstance(ex, SpaceExpression):
                raise KindMismatchError(f"mixed time and space terms: {ex!r}")
        return _combine_space(terms)
    raise KindMismatchError(f"not an expression: {first!r}")


def time_zero() -> TimeLinearCombination:
    return TIME_ZERO


def space_zero() -> SpaceLinearCombination:
    return SPACE_ZERO


# ---------------------------------------------------------------------------
# Canonicalization

def _combine_time(pairs) -> TimeExpression:
    acc: dict[str, Fraction] = {}
    names: dict[str, TimeVariable] = {}

    def add(ex, mult):
        if type(ex) is TimeLinearCombination:
            for sub, c in ex.terms:
                add(sub, mult * c)
        elif type(ex) is TimeVariable:
            acc[ex.name] = acc.get(ex.name, Fraction(0)) + mult
            names[ex.name] = ex
        else:
            raise KindMismatchError(f"not a time expression: {ex!r}")

    for ex, c in pairs:
        add(ex, _as_fraction(c))
    items = sorted((n, c) for n, c in acc.items() if c != 0)
    if not items:
        return TIME_ZERO
    if len(items) == 1 and items[0][1] == 1:
        return names[items[0][0]]
    return TimeLinearCombination(
        tuple((names[n], c) for n, c in items), _canonical=True
    )


def _combine_space(pairs) -> SpaceExpression:
    acc: dict[SpaceExpression, Fraction] = {}

    def add(ex, mult):
        if type(ex) is SpaceLinearCombination:
            for sub, c in ex.terms:
                add(sub, mult * c)
        else:
            cex = canonicalize(ex)
            if type(cex) is SpaceLinearCombination:
                for sub, c in cex.terms:
                    acc[sub] = acc.get(sub, Fraction(0)) + mult * c
            else:
                acc[cex] = acc.get(cex, Fraction(0)) + mult

    for ex, c in pairs:
        add(ex, _as_fraction(c))
    items = [(ex, c) for ex, c in acc.items() if c != 0]
    if not items:
        return SPACE_ZERO
    if len(items) == 1 and items[0][1] == 1:
        return items[0][0]
    items.sort(key=lambda item: sort_key(item[0]))
    return SpaceLinearCombination(tuple(items), _canonical=True)


def is_zero(ex: Expression) -> bool:
    """True iff the canonical form of ``ex`` is the empty combination."""
    cex = canonicalize(ex)
    return (
        type(cex) in (SpaceLinearCombination, TimeLinearCombination)
        and not cex.terms
    )


def canonicalize(ex: Expression) -> Expression:
    """Unique normal form: flat merged sorted combinations, sorted
    symmetric slots, zero slots collapsing the node to zero.  Idempotent."""
    if ex._canonical:
        return ex
    t = type(ex)
    if t is SpaceLinearCombination:
        return _combine_space(ex.terms)
    if t is TimeLinearCombination:
        return _combine_time(ex.terms)
    if t is FunctionApplication:
        base = canonicalize(ex.base)
        slots = _canonical_slots(ex.slots)
        if slots is None:
            return SPACE_ZERO
        if base is ex.base and _all_identical(slots, ex.slots):
            ex._canonical = True
            return ex
        return FunctionApplication(ex.symbol, base, slots, _canonical=True)
    if t is FlowApplication:
        time = canonicalize(ex.time)
        base = canonicalize(ex.base)
        slots = _canonical_slots(ex.slots)
        if slots is None:
            return SPACE_ZERO
        if time is ex.time and base is ex.base and _all_identical(slots, ex.slots):
            ex._canonical = True
            return ex
        return FlowApplication(ex.symbol, time, base, slots, _canonical=True)
    if t is NonAutonomousApplication:
        time = canonicalize(ex.time)
        base = canonicalize(ex.base)
        slots = _canonical_slots(ex.slots)
        if slots is None:
            return SPACE_ZERO
        if time is ex.time and base is ex.base and _all_identical(slots, ex.slots):
            ex._canonical = True
            return ex
        return NonAutonomousApplication(
            ex.symbol, ex.t_order, time, base, slots, _canonical=True
        )
    raise KindMismatchError(f"not an expression: {ex!r}")


def _canonical_slots(slots):
    """Canonicalize and sort derivative slots; None signals a zero slot
    (the node is zero by multilinearity)."""
    out = []
    for s in slots:
        cs = canonicalize(s)
        if type(cs) is SpaceLinearCombination and not cs.terms:
            return None
        out.append(cs)
    out.sort(key=sort_key)
    return tuple(out)


def _all_identical(new, old):
    return len(new) == len(old) and all(a is b for a, b in zip(new, old))


# ---------------------------------------------------------------------------
# Global total order

def sort_key(ex: Expression):
    """Structural sort key: variant rank, then symbol name, then d1
    order, then time, then children.  Total on canonical forms."""
    k = ex._key
    if k is None:
        k = _build_key(ex)
        ex._key = k
    return k


def _build_key(ex):
    t = type(ex)
    if t is SpaceVariable or t is TimeVariable:
        return (_RANK_VARIABLE, ex.name)
    if t is FunctionApplication:
        return (
            _RANK_FUNCTION_APP,
            ex.symbol.name,
            sort_key(ex.base),
            tuple(sort_key(s) for s in ex.slots),
        )
    if t is FlowApplication:
        return (
            _RANK_FLOW_APP,
            ex.symbol.name,
            sort_key(ex.time),
            sort_key(ex.base),
            tuple(sort_key(s) for s in ex.slots),
        )
    if t is NonAutonomousApplication:
        return (
            _RANK_NONAUTONOMOUS_APP,
            ex.symbol.name,
            ex.t_order,
            sort_key(ex.time),
            sort_key(ex.base),
            tuple(sort_key(s) for s in ex.slots),
        )
    if t is SpaceLinearCombination or t is TimeLinearCombination:
        return (
            _RANK_COMBINATION,
            tuple((sort_key(term), c) for term, c in ex.terms),
        )
    raise KindMismatchError(f"not an expression: {ex!r}")


def equivalent(a: Expression, b: Expression) -> bool:
    """Equality in the canonical-form sense."""
    return canonicalize(a) == canonicalize(b)


# ---------------------------------------------------------------------------
# Inspection helpers

def term_count(ex: Expression) -> int:
    """Number of top-level terms of the canonical form: zero counts 0,
    a non-combination counts 1."""
    cex = canonicalize(ex)
    if type(cex) in (SpaceLinearCombination, TimeLinearCombination):
        return len(cex.terms)
    return 1


def terms_of(ex: Expression) -> tuple[tuple[Expression, Fraction], ...]:
    """Top-level (term, coefficient) pairs of the canonical form."""
    cex = canonicalize(ex)
    if type(cex) in (SpaceLinearCombination, TimeLinearCombination):
        return cex.terms
    return ((cex, Fraction(1)),)


def time_coefficients(tex: TimeExpression) -> dict[str, Fraction]:
    """Canonical map variable name -> coefficient."""
    cex = canonicalize(tex)
    if type(cex) is TimeVariable:
        return {cex.name: Fraction(1)}
    return {var.name: c for var, c in cex.terms}


def subexpressions(ex: Expression) -> Iterator[Expression]:
    """Depth-first iteration over ``ex`` and all its subexpressions."""
    stack = [ex]
    while stack:
        node = stack.pop()
        yield node
        t = type(node)
        if t in (SpaceLinearCombination, TimeLinearCombination):
            stack.extend(term for term, _ in node.terms)
        elif t is FunctionApplication:
            stack.append(node.base)
            stack.extend(node.slots)
        elif t is FlowApplication:
            stack.append(node.time)
            stack.append(node.base)
            stack.extend(node.slots)
        elif t is NonAutonomousApplication:
            stack.append(node.time)
            stack.append(node.base)
            stack.extend(node.slots)


def function_symbols(ex: Expression) -> set[FunctionSymbol]:
    return {
        node.symbol
        for node in subexpressions(ex)
        if type(node) in (FunctionApplication, FlowApplication, NonAutonomousApplication)
    }


def space_variables(ex: Expression) -> set[SpaceVariable]:
    return {node for node in subexpressions(ex) if type(node) is SpaceVariable}


def time_variables(ex: Expression) -> set[TimeVariable]:
    return {node for node in subexpressions(ex) if type(node) is TimeVariable}


def has_flow_applications(ex: Expression, symbol: FunctionSymbol) -> bool:
    """True if any flow node of ``symbol`` occurs in ``ex``."""
    return any(
        type(node) is FlowApplication and node.symbol == symbol
        for node in subexpressions(ex)
    )
