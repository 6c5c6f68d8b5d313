"""Finite representative domains for the case variables of a DPN.

Each ordered variable's line is cut at the constants it is compared
against.  Every constant stands for itself and every open interval between
consecutive constants gets one picked representative, so no guard atom of
the net can tell two values of the same class apart.
"""
from __future__ import annotations

import bisect
from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping

from .dpn import DPN, Assignment
from .guards import UNDEFINED, Kind, TypedVariable, extract_constants, format_value

OTHER_STRING = "other"


@dataclass(frozen=True)
class Interval:
    """An equivalence class of values.

    ``lower``/``upper`` are ``None`` for an unbounded side.  Point classes
    (a constant) have ``lower == upper == representative`` and ``point``
    set.  ``representative`` is ``None`` for an empty integer interval.
    """

    lower: object
    upper: object
    representative: object
    point: bool = False

    def describe(self) -> str:
        if self.point:
            return f"={format_value(self.representative)}"
        lo = "-inf" if self.lower is None else format_value(self.lower)
        hi = "+inf" if self.upper is None else format_value(self.upper)
        return f"({lo},{hi})"


@dataclass(frozen=True)
class VariableRepresentatives:
    variable: TypedVariable
    constants: tuple
    representatives: tuple
    intervals: tuple = ()
    dropped: tuple = ()
    open_intervals: tuple = ()

    def rep(self, x):
        if x is UNDEFINED:
            return UNDEFINED
        kind = self.variable.kind
        if kind is Kind.BOOL:
            return x
        if kind is Kind.STRING:
            return x if x in self.constants else self.representatives[-1]
        if not self.constants:
            return self.representatives[0]
        i = bisect.bisect_left(self.constants, x)
        if i < len(self.constants) and self.constants[i] == x:
            return x
        return self.open_intervals[i].representative

    def interval_of(self, x) -> Interval | None:
        """The class containing ``x`` (``None`` for unordered kinds or ⊥)."""
        if x is UNDEFINED or not self.variable.kind.ordered:
            return None
        if not self.constants:
            return self.open_intervals[0]
        i = bisect.bisect_left(self.constants, x)
        if i < len(self.constants) and self.constants[i] == x:
            return Interval(x, x, x, point=True)
        return self.open_intervals[i]


@dataclass(frozen=True)
class RepresentativeMap:
    variables: Mapping[str, VariableRepresentatives]

    def __getitem__(self, name: str) -> VariableRepresentatives:
        return self.variables[name]

    def __iter__(self):
        return iter(self.variables)

    def representatives(self, name: str) -> tuple:
        return self.variables[name].representatives

    def constants(self, name: str) -> tuple:
        return self.variables[name].constants

    def write_choices(self) -> dict:
        return {name: vr.representatives for name, vr in self.variables.items()}

    def describe(self, name: str, value) -> str | None:
        """Human-readable class of ``value`` when it stands for more than itself."""
        vr = self.variables[name]
        if value is UNDEFINED or value in vr.constants:
            return None
        iv = vr.interval_of(value)
        if iv is not None:
            return f"any value in {iv.describe()}"
        if vr.variable.kind is Kind.STRING:
            shown = ", ".join(format_value(c) for c in vr.constants)
            return f"any string not in {{{shown}}}"
        return None


def _pick_int(lo, hi):
    if lo is None and hi is None:
        return 0
    if lo is None:
        return hi - 1
    if hi is None:
        return lo + 1
    return lo + 1 if lo + 1 < hi else None


def _pick_real(lo, hi):
    if lo is None and hi is None:
        return Fraction(0)
    if lo is None:
        return hi - 1
    if hi is None:
        return lo + 1
    return (lo + hi) / 2


def string_sentinel(constants) -> str:
    prefix = "⊛"
    while prefix + OTHER_STRING in constants:
        prefix += "⊛"
    return prefix + OTHER_STRING


def representatives_for(var: TypedVariable, constants) -> VariableRepresentatives:
    constants = tuple(constants)
    kind = var.kind
    if kind is Kind.BOOL:
        return VariableRepresentatives(var, constants, (False, True))
    if kind is Kind.STRING:
        reps = tuple(sorted(constants)) + (string_sentinel(constants),)
        return VariableRepresentatives(var, constants, reps)
    pick = _pick_int if kind is Kind.INT else _pick_real
    bounds = [None, *constants, None]
    intervals, dropped = [], []
    for i in range(len(bounds) - 1):
        lo, hi = bounds[i], bounds[i + 1]
        r = pick(lo, hi)
        iv = Interval(lo, hi, r)
        intervals.append(iv)
        if r is None:
            dropped.append(iv)
        if i < len(constants):
            c = constants[i]
            intervals.append(Interval(c, c, c, point=True))
    reps = tuple(iv.representative for iv in intervals if iv.representative is not None)
    opened = tuple(iv for iv in intervals if not iv.point)
    return VariableRepresentatives(var, constants, reps, tuple(intervals), tuple(dropped), opened)


def build_representatives(net: DPN) -> RepresentativeMap:
    guards = net.guards()
    return RepresentativeMap(
        {v.name: representatives_for(v, extract_constants(guards, v)) for v in net.variables}
    )


def rep(x, var: TypedVariable | str, m: RepresentativeMap):
    name = var if isinstance(var, str) else var.name
    return m[name].rep(x)


def restrict_assignment(alpha: Mapping, m: RepresentativeMap) -> Assignment:
    return Assignment({v: m[v].rep(x) for v, x in alpha.items()})
