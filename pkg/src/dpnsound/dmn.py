"""S-FEEL decision tables and their compilation into plain DPN fragments.

A decision task followed by an exclusive split is replaced by one
transition per (rule, branch) pair whose output literals satisfy the branch
guard.  Such a transition reads the rule inputs, writes the outputs and
carries the conjunction of all three conditions.
"""
from __future__ import annotations

import itertools
import re
from dataclasses import dataclass, field

from .abstraction import representatives_for
from .dpn import DPN, Assignment, Diagnostic, Transition, validate
from .guards import (
    DOMAINS,
    EQ,
    GT,
    LT,
    UNDEFINED,
    Compare,
    ConstantKindMismatch,
    Defined,
    GuardError,
    GuardSyntaxError,
    Kind,
    Occ,
    Or,
    PredicateNotPermitted,
    TypedVariable,
    _Parser,
    _tokenize,
    coerce_value,
    compile_guard,
    conj,
    conjuncts,
    disj,
    eval_guard,
    extract_constants,
    guard_occurrences,
    parse_guard,
    value_matches,
    with_mode,
)


class DmnError(ValueError):
    pass


class UnsupportedHitPolicy(DmnError):
    pass


class OverlappingRules(DmnError):
    def __init__(self, first: int, second: int, inputs: dict):
        shown = ", ".join(f"{k}={v!r}" for k, v in inputs.items())
        super().__init__(f"rules {first + 1} and {second + 1} both match {shown}; the Unique hit policy forbids this")
        self.rules = (first, second)
        self.inputs = inputs


class UnknownPlace(DmnError):
    pass


@dataclass(frozen=True)
class Rule:
    inputs: tuple
    outputs: tuple


@dataclass(frozen=True)
class DecisionTable:
    name: str
    inputs: tuple
    outputs: tuple
    rules: tuple
    hit_policy: str = "UNIQUE"

    def __post_init__(self):
        if self.hit_policy.upper() not in ("U", "UNIQUE"):
            raise UnsupportedHitPolicy(
                f"hit policy {self.hit_policy!r} is not supported: only Unique tables compile to plain "
                "DPN fragments without a combinatorial blow-up"
            )
        for i, r in enumerate(self.rules):
            if len(r.inputs) != len(self.inputs) or len(r.outputs) != len(self.outputs):
                raise DmnError(f"rule {i + 1} has the wrong number of entries")
            for var, value in zip(self.outputs, r.outputs):
                if not value_matches(var.kind, value):
                    raise ConstantKindMismatch(f"rule {i + 1}: output {value!r} does not fit {var.name}: {var.kind.value}")

    @property
    def output_names(self) -> tuple:
        return tuple(v.name for v in self.outputs)

    def input_guard(self, i: int):
        """Read-mode guard of rule ``i`` over the input variables."""
        rule = self.rules[i]
        return conj(parse_sfeel(test, var) for var, test in zip(self.inputs, rule.inputs))

    def output_values(self, i: int) -> dict:
        return dict(zip(self.output_names, self.rules[i].outputs))


@dataclass(frozen=True)
class Branch:
    guard: object
    target: str


@dataclass(frozen=True)
class DecisionFragment:
    name: str
    table: DecisionTable
    transitions: tuple
    branch_places: dict
    unmatched_place: str | None = None
    origin: dict = field(default_factory=dict)
    diagnostics: tuple = ()

    @property
    def transition_ids(self) -> tuple:
        return tuple(t.id for t in self.transitions)


# --------------------------------------------------------------------------
# S-FEEL unary tests

_INTERVAL = re.compile(r"^\s*([\[\]\(])\s*(.+?)\s*\.\.\s*(.+?)\s*([\]\[\)])\s*$")


def _literal(text: str, var: TypedVariable, whole: str):
    tokens = _tokenize(text)
    if len(tokens) != 2:
        raise GuardSyntaxError(f"expected a single literal, found {text!r}", whole, 0)
    return _Parser(text, {var.name: var}).literal(tokens[0], var)


def _split_list(test: str) -> list:
    parts, buf, quoted = [], [], False
    for ch in test:
        if ch == '"':
            quoted = not quoted
        if ch == "," and not quoted:
            parts.append("".join(buf))
            buf = []
        else:
            buf.append(ch)
    parts.append("".join(buf))
    return [p.strip() for p in parts]


def _single(test: str, var: TypedVariable, whole: str):
    occ = Occ(var.name)
    m = _INTERVAL.match(test)
    if m:
        if not var.kind.ordered:
            raise PredicateNotPermitted(f"interval test {whole!r} on unordered {var.name}: {var.kind.value}")
        lo, hi = _literal(m.group(2), var, whole), _literal(m.group(3), var, whole)
        low = Compare(occ, GT, lo)
        if m.group(1) == "[":
            low = Or(low, Compare(occ, EQ, lo))
        high = Compare(occ, LT, hi)
        if m.group(4) == "]":
            high = Or(high, Compare(occ, EQ, hi))
        return conj([low, high])
    m = re.match(r"^\s*(<=|>=|<|>)\s*(.+)$", test)
    if m:
        op, rest = m.groups()
        if not var.kind.ordered:
            raise PredicateNotPermitted(f"{op!r} is not permitted on {var.name}: {var.kind.value}")
        value = _literal(rest, var, whole)
        strict = Compare(occ, LT if op.startswith("<") else GT, value)
        return Or(strict, Compare(occ, EQ, value)) if op.endswith("=") else strict
    if not test:
        raise GuardSyntaxError("empty unary test", whole, 0)
    return Compare(occ, EQ, _literal(test, var, whole))


def parse_sfeel(test: str, var: TypedVariable):
    """Parse an S-FEEL unary test on ``var`` into a read-mode guard."""
    text = test.strip()
    if text == "-":
        return Defined(Occ(var.name))
    return disj(_single(p, var, test) for p in _split_list(text))


def parse_output(raw, var: TypedVariable):
    """An output entry: a JSON scalar or S-FEEL literal text (strings quoted)."""
    if isinstance(raw, str):
        return _literal(raw, var, raw)
    if isinstance(raw, (bool, int, float)):
        value = coerce_value(var.kind, raw)
        if not value_matches(var.kind, value):
            raise ConstantKindMismatch(f"output {raw!r} does not fit {var.name}: {var.kind.value}")
        return value
    raise ConstantKindMismatch(f"output {raw!r} does not fit {var.name}: {var.kind.value}")


# --------------------------------------------------------------------------
# Unique hit policy


def check_unique(tbl: DecisionTable) -> None:
    """Raise :class:`OverlappingRules` if two rules match a common input.

    Enumerating one representative per class of each input suffices since
    no unary test can tell members of a class apart.
    """
    guards = [tbl.input_guard(i) for i in range(len(tbl.rules))]
    checks = [compile_guard(g) for g in guards]
    domains = []
    for var in tbl.inputs:
        reps = representatives_for(var, extract_constants(guards, var)).representatives
        domains.append(reps)
    names = [v.name for v in tbl.inputs]
    for combo in itertools.product(*domains):
        beta = {Occ(n): x for n, x in zip(names, combo)}
        hits = [i for i, c in enumerate(checks) if c(beta)]
        if len(hits) > 1:
            raise OverlappingRules(hits[0], hits[1], dict(zip(names, combo)))


def matching_rule(tbl: DecisionTable, alpha) -> int | None:
    beta = {Occ(v.name): alpha.get(v.name, UNDEFINED) for v in tbl.inputs}
    for i in range(len(tbl.rules)):
        if eval_guard(tbl.input_guard(i), beta):
            return i
    return None


# --------------------------------------------------------------------------
# Compilation


def _branch_matches(guard, outputs: dict) -> bool:
    # Outputs are literals, so co-satisfiability is plain substitution.
    return eval_guard(with_mode(guard, outputs, False), {Occ(k): v for k, v in outputs.items()})


def _dedup(parts) -> list:
    seen, out = set(), []
    for p in parts:
        if p not in seen:
            seen.add(p)
            out.append(p)
    return out


def _place_name(name: str, target: str) -> str:
    return f"{name}_to_{re.sub(r'[^A-Za-z0-9_]+', '_', target)}"


def compile_table(tbl: DecisionTable, branches) -> DecisionFragment:
    """Product of rules and co-satisfiable branches, one transition each."""
    check_unique(tbl)
    branches = [b if isinstance(b, Branch) else Branch(*b) for b in branches]
    outs = set(tbl.output_names)
    for b in branches:
        reads, writes = guard_occurrences(b.guard)
        stray = (reads | writes) - outs
        if stray:
            raise DmnError(f"branch to {b.target!r} mentions non-output variables {sorted(stray)}")
    transitions, origin, diagnostics = [], {}, []
    places = {b.target: _place_name(tbl.name, b.target) for b in branches}
    unmatched = None
    for i, rule in enumerate(tbl.rules):
        outputs = tbl.output_values(i)
        equalities = [Compare(Occ(k, True), EQ, v) for k, v in outputs.items()]
        matched = [j for j, b in enumerate(branches) if _branch_matches(b.guard, outputs)]
        if not matched:
            diagnostics.append(
                Diagnostic(
                    "UncoveredOutput",
                    f"rule {i + 1}",
                    f"outputs {outputs} satisfy no branch guard; the fragment dead-ends there",
                    "warning",
                )
            )
            unmatched = f"{tbl.name}_unmatched"
        for j in matched or [None]:
            parts = conjuncts(tbl.input_guard(i)) + equalities
            if j is not None:
                parts += conjuncts(with_mode(branches[j].guard, outs, True))
            guard = conj(_dedup(parts))
            tid = f"{tbl.name}_r{i + 1}" + (f"_{branches[j].target}" if j is not None else "_unmatched")
            reads, _ = guard_occurrences(guard)
            transitions.append(Transition(tid, guard, frozenset(reads), frozenset(outs), tid))
            origin[tid] = (i, None if j is None else branches[j].target)
    return DecisionFragment(tbl.name, tbl, tuple(transitions), places, unmatched, origin, tuple(diagnostics))


def embed_fragment(host: DPN, at: str, frag: DecisionFragment, siblings: int | None = None) -> DPN:
    """Attach ``frag`` at place ``at`` of ``host``.

    Each branch target must currently consume ``at``; its arc is rerouted
    to the branch place.  With siblings at ``at`` an invisible internal
    transition isolates the fragment in a private entry place.
    """
    if at not in host.places:
        raise UnknownPlace(f"unknown place {at!r}")
    targets = set(frag.branch_places)
    for tgt in targets:
        if tgt not in host.transition_map:
            raise DmnError(f"branch target {tgt!r} is not a transition of the host")
        if (at, tgt) not in host.arcs:
            raise DmnError(f"branch target {tgt!r} does not consume {at!r}")
    if siblings is None:
        siblings = sum(1 for t in host.transitions if (at, t.id) in host.arcs and t.id not in targets)
    taken = set(host.places) | set(host.transition_map)
    for name in list(frag.branch_places.values()) + [frag.unmatched_place] + list(frag.transition_ids):
        if name is not None and name in taken:
            raise DmnError(f"fragment node {name!r} clashes with the host")

    places = list(host.places)
    arcs = set(host.arcs)
    transitions = list(host.transitions)
    entry = at
    if siblings > 0:
        entry = f"{frag.name}_in"
        tau = f"{frag.name}_tau"
        if entry in taken or tau in taken:
            raise DmnError(f"fragment node {entry!r} or {tau!r} clashes with the host")
        places.append(entry)
        transitions.append(Transition(tau, None, label=tau, invisible=True))
        arcs |= {(at, tau), (tau, entry)}
    for tgt, place in frag.branch_places.items():
        places.append(place)
        arcs.discard((at, tgt))
        arcs.add((place, tgt))
    if frag.unmatched_place:
        places.append(frag.unmatched_place)
    for t in frag.transitions:
        transitions.append(t)
        _, target = frag.origin[t.id]
        dst = frag.unmatched_place if target is None else frag.branch_places[target]
        arcs |= {(entry, t.id), (t.id, dst)}

    variables = list(host.variables)
    alpha = dict(host.initial_assignment)
    known = host.variable_map
    for var in frag.table.outputs:
        if var.name in known:
            if known[var.name].kind is not var.kind:
                raise DmnError(f"output {var.name} clashes with a host variable of another type")
            continue
        variables.append(var)
        alpha[var.name] = UNDEFINED
    for var in frag.table.inputs:
        if var.name not in known:
            raise DmnError(f"input {var.name} is not a host variable")
    net = host.replace(
        places=tuple(places),
        transitions=tuple(transitions),
        arcs=frozenset(arcs),
        variables=tuple(variables),
        initial_assignment=Assignment(alpha),
        decisions=host.decisions + (frozenset(frag.transition_ids),),
    )
    problems = validate(net)
    if problems:
        raise DmnError("embedded net is invalid: " + "; ".join(map(str, problems)))
    return net


# --------------------------------------------------------------------------
# JSON table documents


def table_from_dict(doc: dict, variables) -> tuple:
    """Build ``(table, branches)`` from a table document.

    ``variables`` supplies the host's declared variables; outputs may be new
    and are declared in the document itself.
    """
    known = {v.name: v for v in variables}
    try:
        inputs = tuple(known[n] for n in doc["inputs"])
    except KeyError as exc:
        raise DmnError(f"table input {exc.args[0]!r} is not a host variable") from None
    outputs = []
    for o in doc["outputs"]:
        try:
            kind = Kind(o["type"])
        except ValueError:
            raise DmnError(f"unsupported output type {o['type']!r}") from None
        outputs.append(TypedVariable(o["name"], DOMAINS[kind]))
    rules = []
    for i, r in enumerate(doc["rules"]):
        if len(r["outputs"]) != len(outputs):
            raise DmnError(f"rule {i + 1} has {len(r['outputs'])} outputs, expected {len(outputs)}")
        values = tuple(parse_output(raw, var) for raw, var in zip(r["outputs"], outputs))
        rules.append(Rule(tuple(r["inputs"]), values))
    tbl = DecisionTable(doc["name"], inputs, tuple(outputs), tuple(rules), doc.get("hit_policy", "UNIQUE"))
    for i in range(len(tbl.rules)):
        try:
            tbl.input_guard(i)
        except GuardError as exc:
            raise DmnError(f"rule {i + 1}: {exc}") from None
    scope = {v.name: v for v in outputs}
    branches = tuple(Branch(parse_guard(b["guard"], scope), b["target"]) for b in doc.get("branches", []))
    return tbl, branches
