"""Data Petri nets: structure, states and legal transition firings."""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Mapping

from .guards import (
    UNDEFINED,
    Defined,
    Occ,
    TypedVariable,
    compile_guard,
    format_value,
    guard_occurrences,
    iter_atoms,
    value_matches,
    value_sort_key,
)


class Marking:
    """Immutable multiset of places; absent places have count 0."""

    __slots__ = ("_items", "_hash")

    def __init__(self, counts: Mapping[str, int] | Iterable = ()):
        if isinstance(counts, Mapping):
            counts = counts.items()
        merged: dict = {}
        for place, n in counts:
            if n < 0:
                raise ValueError(f"negative token count for {place!r}")
            if n:
                merged[place] = merged.get(place, 0) + n
        self._items = tuple(sorted(merged.items()))
        self._hash = hash(self._items)

    def __getitem__(self, place: str) -> int:
        for p, n in self._items:
            if p == place:
                return n
        return 0

    def items(self):
        return self._items

    def places(self) -> tuple:
        return tuple(p for p, _ in self._items)

    def total(self) -> int:
        return sum(n for _, n in self._items)

    def as_dict(self) -> dict:
        return dict(self._items)

    def __iter__(self):
        return iter(self.places())

    def __len__(self):
        return len(self._items)

    def __eq__(self, other):
        return isinstance(other, Marking) and self._items == other._items

    def __hash__(self):
        return self._hash

    def __ge__(self, other: "Marking") -> bool:
        return all(self[p] >= n for p, n in other._items)

    def __le__(self, other: "Marking") -> bool:
        return other >= self

    def __repr__(self):
        return f"Marking({dict(self._items)!r})"

    def __str__(self):
        return "{" + ", ".join(f"{p}:{n}" for p, n in self._items) + "}"


class Assignment(Mapping):
    """Immutable, hashable mapping used for SV assignments and bindings."""

    __slots__ = ("_data", "_key")

    def __init__(self, data: Mapping | Iterable = ()):
        self._data = dict(data)
        self._key = None

    def __getitem__(self, key):
        return self._data[key]

    def __iter__(self):
        return iter(self._data)

    def __len__(self):
        return len(self._data)

    def _canon(self):
        if self._key is None:
            self._key = frozenset(self._data.items())
        return self._key

    def __hash__(self):
        return hash(self._canon())

    def __eq__(self, other):
        if isinstance(other, Assignment):
            return self._canon() == other._canon()
        return isinstance(other, Mapping) and self._data == dict(other)

    def replace(self, updates: Mapping) -> "Assignment":
        data = dict(self._data)
        data.update(updates)
        return Assignment(data)

    def __repr__(self):
        inner = ", ".join(f"{k}={format_value(v)}" for k, v in self._data.items())
        return f"Assignment({inner})"


@dataclass(frozen=True)
class Transition:
    id: str
    guard: object = None
    reads: frozenset = frozenset()
    writes: frozenset = frozenset()
    label: str | None = None
    invisible: bool = False

    @property
    def name(self) -> str:
        return self.label or self.id


@dataclass(frozen=True)
class DpnState:
    marking: Marking
    assignment: Assignment

    def __str__(self):
        vals = ", ".join(f"{k}={format_value(v)}" for k, v in sorted(self.assignment.items()))
        return f"{self.marking} [{vals}]"


@dataclass(frozen=True)
class TransitionFiring:
    transition: str
    beta: Assignment

    def written(self) -> dict:
        return {occ.name: v for occ, v in self.beta.items() if occ.write}


@dataclass(frozen=True)
class Diagnostic:
    code: str
    subject: str
    message: str
    severity: str = "error"

    def __str__(self):
        return f"{self.code}({self.subject}): {self.message}"


class IllegalFiring(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class DPN:
    places: tuple
    transitions: tuple
    arcs: frozenset
    variables: tuple = ()
    initial_assignment: Assignment = field(default_factory=Assignment)
    initial_marking: Marking = field(default_factory=Marking)
    final_marking: Marking = field(default_factory=Marking)
    decisions: tuple = ()
    name: str = "net"

    @cached_property
    def transition_map(self) -> dict:
        return {t.id: t for t in self.transitions}

    @cached_property
    def variable_map(self) -> dict:
        return {v.name: v for v in self.variables}

    @cached_property
    def preset(self) -> dict:
        pre = {t.id: [] for t in self.transitions}
        for src, dst in sorted(self.arcs):
            if dst in pre and src not in pre:
                pre[dst].append(src)
        return {t: tuple(ps) for t, ps in pre.items()}

    @cached_property
    def postset(self) -> dict:
        post = {t.id: [] for t in self.transitions}
        for src, dst in sorted(self.arcs):
            if src in post and dst not in post:
                post[src].append(dst)
        return {t: tuple(ps) for t, ps in post.items()}

    @cached_property
    def _compiled(self) -> dict:
        return {t.id: compile_guard(t.guard) for t in self.transitions}

    def initial_state(self) -> DpnState:
        return DpnState(self.initial_marking, self.initial_assignment)

    def guards(self) -> list:
        return [t.guard for t in self.transitions]

    def transition(self, tid: str) -> Transition:
        return self.transition_map[tid]

    def written_variables(self) -> set:
        return {v for t in self.transitions for v in t.writes}

    def replace(self, **changes) -> "DPN":
        data = {f: getattr(self, f) for f in self.__dataclass_fields__}
        data.update(changes)
        return DPN(**data)


def validate(net: DPN) -> list:
    """Return error diagnostics; an empty list means the net is well formed."""
    out = []
    places = set(net.places)
    tids = [t.id for t in net.transitions]
    if len(set(net.places)) != len(net.places):
        out.append(Diagnostic("DuplicatePlace", "", "place ids must be unique"))
    if len(set(tids)) != len(tids):
        out.append(Diagnostic("DuplicateTransition", "", "transition ids must be unique"))
    clash = places & set(tids)
    for node in sorted(clash):
        out.append(Diagnostic("NodeClash", node, "id used for both a place and a transition"))
    names = [v.name for v in net.variables]
    if len(set(names)) != len(names):
        out.append(Diagnostic("DuplicateVariable", "", "variable names must be unique"))
    tset = set(tids)
    for src, dst in sorted(net.arcs):
        if not ((src in places and dst in tset) or (src in tset and dst in places)):
            out.append(Diagnostic("BadArc", f"{src}->{dst}", "arcs must connect a place and a transition"))
    known = set(names)
    for t in net.transitions:
        reads, writes = guard_occurrences(t.guard)
        for v in sorted((reads | writes | t.reads | t.writes) - known):
            out.append(Diagnostic("UnknownVariable", t.id, f"variable {v!r} is not declared"))
        for v in sorted(reads - t.reads):
            out.append(Diagnostic("ReadNotDeclared", t.id, f"guard reads {v!r} but it is not in the read set"))
        for v in sorted(writes - t.writes):
            out.append(Diagnostic("WriteNotDeclared", t.id, f"guard writes {v!r} but it is not in the write set"))
        if not net.preset.get(t.id):
            out.append(Diagnostic("NoInputPlace", t.id, "transition has no input place"))
    for v in net.variables:
        value = net.initial_assignment.get(v.name, UNDEFINED)
        if value is not UNDEFINED and not value_matches(v.kind, value):
            out.append(Diagnostic("InitialValueKind", v.name, f"initial value {value!r} is not {v.kind.value}"))
    for v in net.initial_assignment:
        if v not in known:
            out.append(Diagnostic("UnknownVariable", v, "initial value for undeclared variable"))
    for label, m in (("initial", net.initial_marking), ("final", net.final_marking)):
        for p in m.places():
            if p not in places:
                out.append(Diagnostic("UnknownPlace", p, f"{label} marking mentions unknown place"))
    if not net.final_marking.total():
        out.append(Diagnostic("EmptyFinalMarking", "", "final marking must be nonempty"))
    for i, group in enumerate(net.decisions):
        for tid in sorted(group):
            if tid not in tset:
                out.append(Diagnostic("UnknownDecisionTransition", tid, f"decision {i} mentions unknown transition"))
    return out


def lint(net: DPN) -> list:
    """Notes on legal but unusual constructs."""
    out = []
    for t in net.transitions:
        for atom in iter_atoms(t.guard):
            if isinstance(atom, Defined) and atom.occ.write:
                out.append(
                    Diagnostic("DefinedOnWrite", t.id, f"defined({atom.occ}) is always true", severity="note")
                )
    return out


def control_enabled(net: DPN, marking: Marking, tid: str) -> bool:
    return all(marking[p] > 0 for p in net.preset[tid])


def move_tokens(net: DPN, marking: Marking, tid: str) -> Marking:
    counts = marking.as_dict()
    for p in net.preset[tid]:
        counts[p] -= 1
    for p in net.postset[tid]:
        counts[p] = counts.get(p, 0) + 1
    return Marking(counts)


def _successor(net: DPN, state: DpnState, t: Transition, beta: Mapping) -> DpnState:
    updates = {v: beta[Occ(v, True)] for v in t.writes}
    alpha = state.assignment.replace(updates) if updates else state.assignment
    return DpnState(move_tokens(net, state.marking, t.id), alpha)


def legal_firings(net: DPN, state: DpnState, write_choices: Mapping[str, Iterable]) -> list:
    """Enumerate every legal ``(firing, successor)`` from ``state``.

    Written values are drawn from ``write_choices``; order is transition
    declaration order, then candidate order.
    """
    result = []
    alpha = state.assignment
    for t in net.transitions:
        if not control_enabled(net, state.marking, t.id):
            continue
        writes = sorted(t.writes)
        try:
            choices = [list(write_choices[v]) for v in writes]
        except KeyError as exc:
            raise ValueError(f"no write candidates for variable {exc.args[0]!r}") from None
        base = {Occ(v, False): alpha.get(v, UNDEFINED) for v in t.reads}
        check = net._compiled[t.id]
        for combo in itertools.product(*choices):
            beta = dict(base)
            beta.update((Occ(v, True), x) for v, x in zip(writes, combo))
            if check(beta):
                beta = Assignment(beta)
                result.append((TransitionFiring(t.id, beta), _successor(net, state, t, beta)))
    return result


def fire(net: DPN, state: DpnState, firing: TransitionFiring) -> DpnState:
    try:
        t = net.transition(firing.transition)
    except KeyError:
        raise IllegalFiring(f"unknown transition {firing.transition!r}") from None
    beta = firing.beta
    if not control_enabled(net, state.marking, t.id):
        raise IllegalFiring(f"{t.id} is not enabled by the marking {state.marking}")
    expected = {Occ(v, False) for v in t.reads} | {Occ(v, True) for v in t.writes}
    if set(beta) != expected:
        raise IllegalFiring(f"binding for {t.id} must cover exactly {sorted(map(str, expected))}")
    for v in t.reads:
        current, got = state.assignment.get(v, UNDEFINED), beta[Occ(v, False)]
        if (current is UNDEFINED) != (got is UNDEFINED) or (current is not UNDEFINED and current != got):
            raise IllegalFiring(f"read value of {v!r} differs from the current state")
    for v in t.writes:
        x = beta[Occ(v, True)]
        if x is UNDEFINED or not value_matches(net.variable_map[v].kind, x):
            raise IllegalFiring(f"written value {x!r} is not a {net.variable_map[v].kind.value}")
    if not net._compiled[t.id](beta):
        raise IllegalFiring(f"guard of {t.id} is not satisfied")
    return _successor(net, state, t, beta)


def is_final(net: DPN, state: DpnState) -> bool:
    return state.marking == net.final_marking


def sorted_values(values: Iterable) -> list:
    return sorted(values, key=value_sort_key)


def make_net(
    places: Iterable[str],
    transitions: Iterable[Transition],
    arcs: Iterable[tuple],
    variables: Iterable[TypedVariable] = (),
    initial: Mapping | None = None,
    initial_marking: Mapping | None = None,
    final_marking: Mapping | None = None,
    decisions: Iterable[Iterable[str]] = (),
    name: str = "net",
) -> DPN:
    """Convenience constructor; read/write sets are widened to cover guard occurrences."""
    variables = tuple(variables)
    fixed = []
    for t in transitions:
        reads, writes = guard_occurrences(t.guard)
        fixed.append(
            Transition(
                t.id,
                t.guard,
                frozenset(t.reads) | reads,
                frozenset(t.writes) | writes,
                t.label,
                t.invisible,
            )
        )
    alpha = {v.name: UNDEFINED for v in variables}
    alpha.update(initial or {})
    return DPN(
        places=tuple(places),
        transitions=tuple(fixed),
        arcs=frozenset(tuple(a) for a in arcs),
        variables=variables,
        initial_assignment=Assignment(alpha),
        initial_marking=Marking(initial_marking or {}),
        final_marking=Marking(final_marking or {}),
        decisions=tuple(frozenset(d) for d in decisions),
        name=name,
    )
