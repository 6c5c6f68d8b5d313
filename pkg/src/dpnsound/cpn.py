"""Colored Petri nets and the translation of a DPN into one.

The translated net keeps the DPN's places and transitions (control places
carry black tokens) and adds, per case variable ``v``:

* a variable place ``var_v`` holding exactly one token, the current value;
* a restriction place ``rep_v`` holding one token per representative value,
  from which written values are drawn and to which they are returned.
"""
from __future__ import annotations

import itertools
from collections import Counter
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Mapping

from .abstraction import RepresentativeMap
from .dpn import DPN, Assignment, DpnState, Marking
from .guards import UNDEFINED, Occ, compile_guard, format_guard, format_value, iter_atoms, value_sort_key


class _Black:
    __slots__ = ()

    def __repr__(self):
        return "•"

    def __reduce__(self):
        return "BLACK"


class _Dot:
    __slots__ = ()

    def __repr__(self):
        return "v•"

    def __str__(self):
        return "v•"

    def __reduce__(self):
        return "DOT"


BLACK = _Black()
"""The colorless token."""

DOT = _Dot()
"""Arc variable that only ever binds to :data:`BLACK`."""

BLACK_SET = "•"


def color_key(color):
    if color is BLACK:
        return (-1, 0)
    return value_sort_key(color)


def var_key(var):
    if var is DOT:
        return ("", 2)
    return (var.name, int(var.write))


class IllegalBinding(ValueError):
    pass


class MalformedMarking(ValueError):
    pass


class CpnMarking:
    """Immutable place -> multiset-of-colors map in canonical sorted form."""

    __slots__ = ("_items", "_dict", "_hash")

    def __init__(self, contents: Mapping[str, Iterable] | Iterable = ()):
        if isinstance(contents, Mapping):
            contents = contents.items()
        data = {}
        for place, tokens in contents:
            counter = tokens if isinstance(tokens, Counter) else Counter(tokens)
            pairs = tuple(sorted(((c, n) for c, n in counter.items() if n > 0), key=lambda cn: color_key(cn[0])))
            if pairs:
                data[place] = pairs
        self._dict = data
        self._items = tuple(sorted(data.items()))
        self._hash = hash(self._items)

    @classmethod
    def _from_dict(cls, data: dict) -> "CpnMarking":
        mk = cls.__new__(cls)
        mk._dict = data
        mk._items = tuple(sorted(data.items()))
        mk._hash = hash(mk._items)
        return mk

    def tokens(self, place: str) -> tuple:
        """``((color, count), ...)`` for ``place`` in sorted color order."""
        return self._dict.get(place, ())

    def colors(self, place: str) -> list:
        return [c for c, _ in self._dict.get(place, ())]

    def count(self, place: str) -> int:
        return sum(n for _, n in self._dict.get(place, ()))

    def multiset(self, place: str) -> Counter:
        return Counter(dict(self._dict.get(place, ())))

    def items(self):
        return self._items

    def project(self, places: Iterable[str]) -> tuple:
        return tuple((p, self._dict[p]) for p in places if p in self._dict)

    def __eq__(self, other):
        return isinstance(other, CpnMarking) and self._items == other._items

    def __hash__(self):
        return self._hash

    def __repr__(self):
        body = ", ".join(
            f"{p}: [" + ", ".join(f"{n}`{c!r}" if n > 1 else repr(c) for c, n in toks) + "]"
            for p, toks in self._items
        )
        return "CpnMarking({" + body + "})"


@dataclass(frozen=True)
class CpnArc:
    src: str
    dst: str
    expr: object


@dataclass(frozen=True, eq=False)
class CPN:
    places: tuple
    transitions: tuple
    arcs: tuple
    colorsets: Mapping[str, object]
    guards: Mapping[str, object]
    init: CpnMarking
    variable_places: Mapping[str, str] = field(default_factory=dict)
    restriction_places: Mapping[str, str] = field(default_factory=dict)
    final_marking: Marking = field(default_factory=Marking)
    labels: Mapping[str, str] = field(default_factory=dict)
    invisible: frozenset = frozenset()
    source: DPN | None = None

    @cached_property
    def control_places(self) -> tuple:
        special = set(self.variable_places.values()) | set(self.restriction_places.values())
        return tuple(p for p in self.places if p not in special)

    @cached_property
    def inputs(self) -> dict:
        ins = {t: [] for t in self.transitions}
        for a in self.arcs:
            if a.dst in ins:
                ins[a.dst].append((a.src, a.expr))
        return {t: tuple(sorted(v, key=lambda pe: pe[0])) for t, v in ins.items()}

    @cached_property
    def outputs(self) -> dict:
        outs = {t: [] for t in self.transitions}
        for a in self.arcs:
            if a.src in outs:
                outs[a.src].append((a.dst, a.expr))
        return {t: tuple(sorted(v, key=lambda pe: pe[0])) for t, v in outs.items()}

    @cached_property
    def binding_variables(self) -> dict:
        """Variables of the arcs entering each transition, in enumeration order."""
        return {t: tuple(sorted({e for _, e in arcs}, key=var_key)) for t, arcs in self.inputs.items()}

    @cached_property
    def _compiled(self) -> dict:
        return {t: compile_guard(self.guards.get(t)) for t in self.transitions}

    @cached_property
    def cpn_variables(self) -> frozenset:
        return frozenset(a.expr for a in self.arcs)

    @cached_property
    def firing_plan(self) -> dict:
        """Per transition: ``(place, consumed exprs, produced exprs)`` for places it changes.

        Places where the consumed and produced expressions coincide (the
        restriction places, and read-only variable places) are left out since
        firing returns exactly the token it took.
        """
        plan = {}
        for t in self.transitions:
            per = {}
            for place, e in self.inputs[t]:
                per.setdefault(place, ([], []))[0].append(e)
            for place, e in self.outputs[t]:
                per.setdefault(place, ([], []))[1].append(e)
            plan[t] = tuple(
                (p, tuple(c), tuple(o)) for p, (c, o) in sorted(per.items()) if Counter(c) != Counter(o)
            )
        return plan

    def written_variables(self, t: str) -> tuple:
        return tuple(v for v in self.binding_variables[t] if v is not DOT and v.write)


def guard_variable_violations(cpn: CPN) -> list:
    """Transitions whose guard uses a variable not on an entering arc."""
    bad = []
    for t in cpn.transitions:
        allowed = set(cpn.binding_variables[t])
        for atom in iter_atoms(cpn.guards.get(t)):
            if atom.occ not in allowed:
                bad.append((t, atom.occ))
    return bad


def _fresh(name: str, used: set) -> str:
    while name in used:
        name = "_" + name
    used.add(name)
    return name


def translate(net: DPN, m: RepresentativeMap) -> CPN:
    used = set(net.places) | {t.id for t in net.transitions}
    var_places = {v.name: _fresh(f"var_{v.name}", used) for v in net.variables}
    rep_places = {v.name: _fresh(f"rep_{v.name}", used) for v in net.variables}
    arcs = [CpnArc(s, d, DOT) for s, d in sorted(net.arcs)]
    for t in net.transitions:
        for v in sorted(t.reads | t.writes):
            xi = var_places[v]
            arcs.append(CpnArc(xi, t.id, Occ(v, False)))
            arcs.append(CpnArc(t.id, xi, Occ(v, v in t.writes)))
        for v in sorted(t.writes):
            rho = rep_places[v]
            arcs.append(CpnArc(rho, t.id, Occ(v, True)))
            arcs.append(CpnArc(t.id, rho, Occ(v, True)))
    colorsets = {p: BLACK_SET for p in net.places}
    init = {p: Counter({BLACK: n}) for p, n in net.initial_marking.items()}
    for v in net.variables:
        colorsets[var_places[v.name]] = v.kind
        colorsets[rep_places[v.name]] = v.kind
        init[var_places[v.name]] = Counter([net.initial_assignment.get(v.name, UNDEFINED)])
        init[rep_places[v.name]] = Counter(m.representatives(v.name))
    places = tuple(net.places) + tuple(var_places[v.name] for v in net.variables) + tuple(
        rep_places[v.name] for v in net.variables
    )
    return CPN(
        places=places,
        transitions=tuple(t.id for t in net.transitions),
        arcs=tuple(arcs),
        colorsets=colorsets,
        guards={t.id: t.guard for t in net.transitions},
        init=CpnMarking(init),
        variable_places=var_places,
        restriction_places=rep_places,
        final_marking=net.final_marking,
        labels={t.id: t.name for t in net.transitions},
        invisible=frozenset(t.id for t in net.transitions if t.invisible),
        source=net,
    )


def legal_bindings(cpn: CPN, mk: CpnMarking, t: str) -> list:
    """All legal bindings of ``t`` in ``mk``, in sorted enumeration order."""
    candidates: dict = {}
    for place, expr in cpn.inputs[t]:
        colors = mk.colors(place)
        if not colors:
            return []
        if expr in candidates:
            keep = set(colors)
            candidates[expr] = [c for c in candidates[expr] if c in keep]
        else:
            candidates[expr] = colors
    order = cpn.binding_variables[t]
    pools = [candidates[v] for v in order]
    if not all(pools):
        return []
    check = cpn._compiled[t]
    result = []
    for combo in itertools.product(*pools):
        gamma = dict(zip(order, combo))
        if DOT in gamma and gamma[DOT] is not BLACK:
            continue
        if check(gamma):
            result.append(Assignment(gamma))
    return result


def fire_cpn(cpn: CPN, mk: CpnMarking, t: str, gamma: Mapping) -> CpnMarking:
    if t not in cpn.inputs:
        raise IllegalBinding(f"unknown transition {t!r}")
    expected = set(cpn.binding_variables[t])
    if set(gamma) != expected:
        raise IllegalBinding(f"binding of {t} must cover exactly {sorted(map(str, expected))}")
    if DOT in gamma and gamma[DOT] is not BLACK:
        raise IllegalBinding("the dummy variable only binds the black token")
    for place, expr in cpn.inputs[t]:
        if gamma[expr] not in mk.colors(place):
            raise IllegalBinding(f"{place} holds no token {gamma[expr]!r}")
    if not cpn._compiled[t](gamma):
        raise IllegalBinding(f"guard of {t} is not satisfied")
    return _fire_unchecked(cpn, mk, t, gamma)


def _fire_unchecked(cpn: CPN, mk: CpnMarking, t: str, gamma: Mapping) -> CpnMarking:
    data = dict(mk._dict)
    for place, consumed, produced in cpn.firing_plan[t]:
        counts = dict(data.get(place, ()))
        for e in consumed:
            counts[gamma[e]] -= 1
        for e in produced:
            col = gamma[e]
            counts[col] = counts.get(col, 0) + 1
        pairs = [(col, n) for col, n in counts.items() if n > 0]
        if len(pairs) > 1:
            pairs.sort(key=lambda cn: color_key(cn[0]))
        if pairs:
            data[place] = tuple(pairs)
        else:
            data.pop(place, None)
    return CpnMarking._from_dict(data)


def state_to_marking(s: DpnState, cpn: CPN) -> CpnMarking:
    data = {p: Counter({BLACK: n}) for p, n in s.marking.items()}
    for v, place in cpn.variable_places.items():
        data[place] = Counter([s.assignment.get(v, UNDEFINED)])
    for v, place in cpn.restriction_places.items():
        data[place] = cpn.init.multiset(place)
    return CpnMarking(data)


def control_marking(mk: CpnMarking, cpn: CPN) -> Marking:
    return Marking({p: mk.count(p) for p in cpn.control_places})


def marking_to_state(mk: CpnMarking, cpn: CPN) -> DpnState:
    alpha = {}
    for v, place in cpn.variable_places.items():
        toks = mk.tokens(place)
        if sum(n for _, n in toks) != 1:
            raise MalformedMarking(f"variable place {place} must hold exactly one token, found {toks!r}")
        alpha[v] = toks[0][0]
    return DpnState(control_marking(mk, cpn), Assignment(alpha))


def binding_digest(cpn: CPN, t: str, gamma: Mapping) -> tuple:
    """``((var, written value), ...)`` for ``t``; read values follow from the source marking."""
    return tuple((v.name, gamma[v]) for v in cpn.written_variables(t))


def to_json(cpn: CPN) -> dict:
    def colorset(cs):
        return cs if cs == BLACK_SET else cs.value

    def token(c):
        if c is BLACK:
            return "•"
        if c is UNDEFINED:
            return None
        if isinstance(c, (bool, int, str)):
            return c
        return format_value(c)

    return {
        "places": [
            {
                "id": p,
                "colorset": colorset(cpn.colorsets[p]),
                "role": (
                    "variable"
                    if p in cpn.variable_places.values()
                    else "restriction"
                    if p in cpn.restriction_places.values()
                    else "control"
                ),
                "init": [[token(c), n] for c, n in cpn.init.tokens(p)],
            }
            for p in cpn.places
        ],
        "transitions": [
            {"id": t, "guard": format_guard(cpn.guards.get(t)), "invisible": t in cpn.invisible}
            for t in cpn.transitions
        ],
        "arcs": [{"src": a.src, "dst": a.dst, "expr": str(a.expr)} for a in cpn.arcs],
    }

