"""Symbol declarations.

A :class:`Context` owns the names used by a family of expressions:
time variables, space variables, and function symbols.  Names are
unique across all three registries.  Declaration happens once, up
front; every operation then treats the context as read-only, so
contexts and the expressions built from them can be shared freely.
"""

from __future__ import annotations

import re

from .errors import DeclarationConflictError, UndeclaredSymbolError
from .expressions import FunctionSymbol, SpaceVariable, TimeVariable

# Plain identifiers only.  Names starting with d1/d2 are rejected so the
# textual rendering (d2E_A, d1S, ...) stays unambiguous; "@..." names
# are reserved for internal bound variables.
_IDENTIFIER = re.compile(r"[A-Za-z][A-Za-z0-9]*\Z")
_RESERVED_PREFIX = re.compile(r"d[12]")
_RESERVED_WORDS = frozenset({"sum", "tsum", "app", "flow", "nap"})


class Context:
    """Registry of declared symbols; owner of name uniqueness."""

    def __init__(self):
        self._time: dict[str, TimeVariable] = {}
        self._space: dict[str, SpaceVariable] = {}
        self._functions: dict[str, FunctionSymbol] = {}

    # -- declaration --------------------------------------------------

    def time_variables(self, *names: str) -> tuple[TimeVariable, ...]:
        return tuple(self._declare(n, TimeVariable, self._time) for n in names)

    def space_variables(self, *names: str) -> tuple[SpaceVariable, ...]:
        return tuple(self._declare(n, SpaceVariable, self._space) for n in names)

    def autonomous_functions(self, *names: str) -> tuple[FunctionSymbol, ...]:
        return tuple(
            self._declare(n, lambda m: FunctionSymbol(m, True), self._functions)
            for n in names
        )

    def nonautonomous_functions(self, *names: str) -> tuple[FunctionSymbol, ...]:
        return tuple(
            self._declare(n, lambda m: FunctionSymbol(m, False), self._functions)
            for n in names
        )

    def _declare(self, name, make, registry):
        if not _IDENTIFIER.match(name):
            raise DeclarationConflictError(
                f"invalid identifier {name!r}: letters and digits only, "
                "starting with a letter"
            )
        if _RESERVED_PREFIX.match(name) or name in _RESERVED_WORDS:
            raise DeclarationConflictError(
                f"{name!r} collides with reserved notation"
            )
        if name in self._time or name in self._space or name in self._functions:
            raise DeclarationConflictError(f"name {name!r} already declared")
        atom = make(name)
        registry[name] = atom
        return atom

    # -- lookup -------------------------------------------------------

    def time_variable(self, name: str) -> TimeVariable:
        try:
            return self._time[name]
        except KeyError:
            raise UndeclaredSymbolError(f"time variable {name!r} not declared") from None

    def space_variable(self, name: str) -> SpaceVariable:
        try:
            return self._space[name]
        except KeyError:
            raise UndeclaredSymbolError(f"space variable {name!r} not declared") from None

    def function(self, name: str) -> FunctionSymbol:
        try:
            return self._functions[name]
        except KeyError:
            raise UndeclaredSymbolError(f"function symbol {name!r} not declared") from None

    def lookup(self, name: str):
        """The declared atom for ``name``, or None."""
        return (
            self._time.get(name)
            or self._space.get(name)
            or self._functions.get(name)
        )

    def known_names(self) -> set[str]:
        return set(self._time) | set(self._space) | set(self._functions)


_KINDS = {
    "time-variable": Context.time_variables,
    "space-variable": Context.space_variables,
    "autonomous-function": Context.autonomous_functions,
    "nonautonomous-function": Context.nonautonomous_functions,
}


def declare(ctx: Context, kind: str, names) -> tuple:
    """Register ``names`` of the given kind in ``ctx`` and return the
    corresponding atoms in declaration order.

    ``kind`` is one of "time-variable", "space-variable",
    "autonomous-function", "nonautonomous-function".
    """
    try:
        method = _KINDS[kind]
    except KeyError:
        raise ValueError(
            f"unknown declaration kind {kind!r}; expected one of {sorted(_KINDS)}"
        ) from None
    return method(ctx, *names)
