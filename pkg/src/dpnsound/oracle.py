"""Brute-force concrete semantics and bounded trace-set comparison.

The concrete side enumerates every legal firing over explicit finite value
lists; the abstract side walks the reachability graph of the translated
CPN.  Agreement of the two at bounded depth, plus agreement of soundness
verdicts, is the executable check of the abstraction.
"""
from __future__ import annotations

import random
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Mapping

from .abstraction import RepresentativeMap, build_representatives
from .cpn import translate
from .dmn import Branch, DecisionTable, Rule, compile_table, embed_fragment, matching_rule
from .dpn import DPN, Assignment, DpnState, Transition, control_enabled, legal_firings, make_net, move_tokens
from .guards import (
    EQ,
    GT,
    INT,
    LT,
    NE,
    STRING,
    UNDEFINED,
    And,
    Compare,
    Defined,
    Kind,
    Occ,
    Or,
    TypedVariable,
    coerce_value,
    disj,
    value_matches,
    value_sort_key,
    with_mode,
)
from .soundness import SoundnessReport, analyse_graph
from .statespace import ExplorationConfig, ReachabilityGraph, bfs, explore

DEFAULT_DEPTH = 6


class OracleError(ValueError):
    pass


class TraceExplosion(OracleError):
    def __init__(self, cap: int):
        super().__init__(f"more than {cap} (prefix, state) pairs; raise the cap or shrink the domains")
        self.cap = cap


@dataclass(frozen=True)
class FiniteDomainSpec:
    values: Mapping[str, tuple]

    def __getitem__(self, name):
        return self.values[name]

    def validate(self, net: DPN, repmap: RepresentativeMap | None = None) -> list:
        """Problems that make these domains unusable for ``net`` (empty when fine)."""
        problems = []
        repmap = repmap or build_representatives(net)
        written = net.written_variables()
        for var in net.variables:
            vals = self.values.get(var.name)
            if vals is None:
                if var.name in written:
                    problems.append(f"{var.name}: no values given for a written variable")
                continue
            if not vals and var.name in written:
                problems.append(f"{var.name}: empty value list for a written variable")
            bad = [x for x in vals if not value_matches(var.kind, x)]
            if bad:
                problems.append(f"{var.name}: values {bad!r} are not {var.kind.value}")
            init = net.initial_assignment.get(var.name, UNDEFINED)
            if init is not UNDEFINED and init not in vals:
                problems.append(f"{var.name}: initial value {init!r} missing")
            missing = [c for c in repmap.constants(var.name) if c not in vals]
            if missing:
                problems.append(f"{var.name}: constants {missing!r} missing")
        return problems

    def covers_all_intervals(self, repmap: RepresentativeMap) -> bool:
        for name in repmap:
            vr = repmap[name]
            vals = self.values.get(name, ())
            if vr.variable.kind is Kind.BOOL:
                if set(vals) != {False, True}:
                    return False
                continue
            hit = {vr.rep(x) for x in vals}
            if not set(vr.representatives) <= hit:
                return False
        return True


def spec_from_dict(doc: Mapping, net: DPN) -> FiniteDomainSpec:
    """Build a spec from ``{"v": [..]}`` or ``{"v": {"range": [a, b], "step": s}}`` (inclusive).

    Boolean variables left out of ``doc`` range over both truth values.
    """
    values = {}
    kinds = {v.name: v.kind for v in net.variables}
    for name, raw in doc.items():
        if name not in kinds:
            raise OracleError(f"unknown variable {name!r} in domain spec")
        kind = kinds[name]
        if isinstance(raw, dict):
            lo, hi = raw["range"]
            step = raw.get("step", 1)
            if step <= 0:
                raise OracleError(f"{name}: step must be positive")
            items, x = [], Fraction(str(lo)) if kind is Kind.REAL else lo
            while x <= hi:
                items.append(x)
                x += Fraction(str(step)) if kind is Kind.REAL else step
        else:
            items = [coerce_value(kind, x) for x in raw]
        values[name] = tuple(sorted(set(items), key=value_sort_key))
    for var in net.variables:
        if var.kind is Kind.BOOL and var.name not in values:
            values[var.name] = (False, True)
    return FiniteDomainSpec(values)


def dense_spec(net: DPN, repmap: RepresentativeMap | None = None) -> FiniteDomainSpec:
    """A spec holding at least two values in every class where possible."""
    repmap = repmap or build_representatives(net)
    values = {}
    for var in net.variables:
        vr = repmap[var.name]
        kind = var.kind
        found = set(vr.representatives)
        init = net.initial_assignment.get(var.name, UNDEFINED)
        if init is not UNDEFINED:
            found.add(init)
        cs = vr.constants
        if kind is Kind.INT:
            lo, hi = (min(cs), max(cs)) if cs else (0, 0)
            found.update(range(lo - 2, hi + 3))
        elif kind is Kind.REAL:
            for a, b in zip(cs, cs[1:]):
                found.update({a + (b - a) / 3, a + 2 * (b - a) / 3})
            if cs:
                found.update({cs[0] - 2, cs[-1] + 2})
            else:
                found.update({Fraction(-1), Fraction(1)})
        elif kind is Kind.STRING:
            found.add(vr.representatives[-1] + "#2")
        values[var.name] = tuple(sorted(found, key=value_sort_key))
    return FiniteDomainSpec(values)


# --------------------------------------------------------------------------
# Bounded trace sets


@dataclass(frozen=True)
class BoundedTraceSet:
    depth: int
    traces: frozenset

    def __contains__(self, seq):
        return tuple(seq) in self.traces

    def __len__(self):
        return len(self.traces)


def bounded_traces(initial, successors: Callable, depth: int, cap: int = 2_000_000) -> BoundedTraceSet:
    """Transition-label sequences of length ``<= depth`` from ``initial``.

    ``successors(node)`` yields ``(label, node)`` pairs.  Each prefix keeps
    the set of nodes it can end in, so shared prefixes are expanded once.
    """
    if depth < 0:
        raise ValueError("depth must be non-negative")
    traces = {()}
    layer = {(): frozenset([initial])}
    work = 1
    for _ in range(depth):
        nxt: dict = {}
        for prefix, nodes in layer.items():
            for n in nodes:
                for label, m in successors(n):
                    nxt.setdefault(prefix + (label,), set()).add(m)
        work += sum(len(s) for s in nxt.values())
        if work > cap:
            raise TraceExplosion(cap)
        if not nxt:
            break
        traces.update(nxt)
        layer = {k: frozenset(v) for k, v in nxt.items()}
    return BoundedTraceSet(depth, frozenset(traces))


def concrete_traces(net: DPN, spec: FiniteDomainSpec, L: int = DEFAULT_DEPTH, cap: int = 2_000_000) -> BoundedTraceSet:
    problems = spec.validate(net)
    if problems:
        raise OracleError("; ".join(problems))
    choices = _choices(net, spec)
    memo: dict = {}

    def successors(state):
        out = memo.get(state)
        if out is None:
            out = memo[state] = [(f.transition, s) for f, s in legal_firings(net, state, choices)]
        return out

    return bounded_traces(net.initial_state(), successors, L, cap)


def abstract_traces(g: ReachabilityGraph, L: int = DEFAULT_DEPTH) -> BoundedTraceSet:
    def successors(node):
        return [(g.edges[e].transition, g.edges[e].dst) for e in g.out[node]]

    return bounded_traces(g.initial, successors, L)


def compare(a: BoundedTraceSet, b: BoundedTraceSet):
    """``None`` when equal, else a shortest sequence in exactly one set."""
    if a.depth != b.depth:
        raise ValueError(f"depths differ: {a.depth} vs {b.depth}")
    diff = a.traces ^ b.traces
    if not diff:
        return None
    return min(diff, key=lambda s: (len(s), s))


# --------------------------------------------------------------------------
# Concrete state graphs and verdicts


def _choices(net: DPN, spec: FiniteDomainSpec) -> dict:
    return {v.name: tuple(spec.values.get(v.name, ())) for v in net.variables}


def concrete_graph(net: DPN, spec: FiniteDomainSpec, cfg: ExplorationConfig | None = None) -> ReachabilityGraph:
    cfg = cfg or ExplorationConfig()
    choices = _choices(net, spec)

    def successors(state):
        for f, s in legal_firings(net, state, choices):
            yield f.transition, tuple(sorted(f.written().items())), s

    g = ReachabilityGraph(
        [t.id for t in net.transitions],
        net.final_marking,
        net.preset,
        invisible=[t.id for t in net.transitions if t.invisible],
    )
    return bfs(g, net.initial_state(), successors, lambda s: s.marking, lambda s: s, cfg)


def concrete_report(net: DPN, spec: FiniteDomainSpec, cfg=None, properties: str = "all") -> SoundnessReport:
    g = concrete_graph(net, spec, cfg)
    return analyse_graph(g, decisions=net.decisions, properties=properties, model=net.name)


def abstract_graph(net: DPN, cfg=None) -> ReachabilityGraph:
    return explore(translate(net, build_representatives(net)), cfg)


@dataclass
class Agreement:
    net: str
    trace_witness: tuple | None
    abstract_verdict: bool
    concrete_verdict: bool
    abstract_traces: int = 0
    concrete_traces: int = 0

    @property
    def ok(self) -> bool:
        return self.trace_witness is None and self.abstract_verdict == self.concrete_verdict


def check_agreement(net: DPN, spec: FiniteDomainSpec | None = None, L: int = DEFAULT_DEPTH, cfg=None) -> Agreement:
    repmap = build_representatives(net)
    spec = spec or dense_spec(net, repmap)
    g = explore(translate(net, repmap), cfg)
    a = abstract_traces(g, L)
    c = concrete_traces(net, spec, L)
    av = analyse_graph(g, repmap=repmap, properties="data-aware").data_aware_sound
    cv = concrete_report(net, spec, cfg, properties="data-aware").data_aware_sound
    return Agreement(net.name, compare(c, a), av, cv, len(a), len(c))


# --------------------------------------------------------------------------
# Random small nets

MAX_PLACES = 6
MAX_TRANSITIONS = 6
MAX_VARIABLES = 2
CONSTANT_RANGE = (0, 10)


@dataclass
class _Skeleton:
    places: list
    transitions: list
    arcs: set
    counter: int = 0
    looped: bool = False

    def fresh_place(self):
        self.counter += 1
        p = f"p{self.counter}"
        self.places.append(p)
        return p

    def fresh_transition(self):
        t = f"t{len(self.transitions) + 1}"
        self.transitions.append(t)
        return t

    def pre(self, t):
        return [p for p, q in self.arcs if q == t]

    def post(self, t):
        return [q for p, q in self.arcs if p == t]


def _skeleton(rng: random.Random, max_places: int, max_transitions: int) -> _Skeleton:
    sk = _Skeleton(["i", "o"], [], set())
    t = sk.fresh_transition()
    sk.arcs |= {("i", t), (t, "o")}
    for _ in range(12):
        room_p = max_places - len(sk.places)
        room_t = max_transitions - len(sk.transitions)
        moves = []
        if room_p >= 1 and room_t >= 1:
            moves += ["seq", "seq"]
        if room_t >= 1:
            moves += ["xor"]
        if room_p >= 2 and room_t >= 1:
            moves += ["and"]
        if room_t >= 1 and not sk.looped:
            moves += ["loop"]
        if not moves:
            break
        move = rng.choice(moves)
        t = rng.choice(sk.transitions)
        if move == "seq":
            m, t2 = sk.fresh_place(), sk.fresh_transition()
            for q in sk.post(t):
                sk.arcs.discard((t, q))
                sk.arcs.add((t2, q))
            sk.arcs |= {(t, m), (m, t2)}
        elif move == "xor":
            t2 = sk.fresh_transition()
            sk.arcs |= {(p, t2) for p in sk.pre(t)} | {(t2, q) for q in sk.post(t)}
        elif move == "and":
            a, b, j = sk.fresh_place(), sk.fresh_place(), sk.fresh_transition()
            for q in sk.post(t):
                sk.arcs.discard((t, q))
                sk.arcs.add((j, q))
            sk.arcs |= {(t, a), (t, b), (a, j), (b, j)}
        else:
            pre, post = sk.pre(t), sk.post(t)
            if len(pre) != 1 or len(post) != 1 or pre[0] == "i" or post[0] == "o":
                continue
            back = sk.fresh_transition()
            sk.arcs |= {(post[0], back), (back, pre[0])}
            sk.looped = True
    return sk


def _random_atom(rng, names, write_ok, reads_ok=True):
    occs = []
    for n in names:
        if reads_ok:
            occs.append(Occ(n, False))
        if write_ok:
            occs.append(Occ(n, True))
    occ = rng.choice(occs)
    if rng.random() < 0.12:
        return Defined(occ)
    return Compare(occ, rng.choice([LT, GT, EQ, NE, LT, GT]), rng.randint(*CONSTANT_RANGE))


def _random_guard(rng, names, write_ok, depth=0):
    r = rng.random()
    if depth < 2 and r < 0.25:
        return And(_random_guard(rng, names, write_ok, depth + 1), _random_guard(rng, names, write_ok, depth + 1))
    if depth < 2 and r < 0.4:
        return Or(_random_guard(rng, names, write_ok, depth + 1), _random_guard(rng, names, write_ok, depth + 1))
    return _random_atom(rng, names, write_ok)


def random_dpn(seed: int, max_places: int = MAX_PLACES, max_transitions: int = MAX_TRANSITIONS) -> DPN:
    """A seeded small workflow-shaped DPN with up to two integer variables.

    Nets are built from sequence/xor/and refinements plus at most one loop,
    then occasionally mutated with an extra arc so unsound shapes appear.
    """
    rng = random.Random(seed)
    sk = _skeleton(rng, max_places, max_transitions)
    mutation = rng.random()
    if mutation < 0.15 and len(sk.places) > 2:
        # extra output token: improper completion or unboundedness
        t = rng.choice(sk.transitions)
        q = rng.choice([p for p in sk.places if p != "i"])
        sk.arcs.add((t, q))
    elif mutation < 0.3 and len(sk.places) > 2:
        # extra input: possible deadlock or dead transition
        t = rng.choice(sk.transitions)
        p = rng.choice([p for p in sk.places if p != "o"])
        sk.arcs.add((p, t))
    nvars = rng.randint(0, MAX_VARIABLES)
    names = [f"x{k}" for k in range(nvars)]
    variables = [TypedVariable(n, INT) for n in names]
    initial = {n: (rng.randint(*CONSTANT_RANGE) if rng.random() < 0.3 else UNDEFINED) for n in names}
    transitions = []
    for tid in sk.transitions:
        guard, writes = None, set()
        if names:
            if rng.random() < 0.45:
                writes = set(rng.sample(names, rng.randint(1, len(names))))
            if rng.random() < 0.7:
                guard = _random_guard(rng, names, bool(writes))
                # occurrences of unwritten variables in write mode are not allowed
                guard = with_mode(guard, set(names) - writes, False)
        transitions.append(Transition(tid, guard, writes=frozenset(writes)))
    return make_net(
        sk.places,
        transitions,
        sk.arcs,
        variables,
        initial,
        {"i": 1},
        {"o": 1},
        name=f"random-{seed}",
    )


def random_corpus(n: int, seed: int = 0, cfg: ExplorationConfig | None = None) -> list:
    """``n`` random nets whose state spaces stay within ``cfg`` bounds.

    Seeds producing unbounded nets are skipped deterministically.
    """
    from .statespace import ExplorationError

    cfg = cfg or ExplorationConfig(max_tokens_per_place=3, max_nodes=20_000)
    nets, s = [], seed
    while len(nets) < n:
        net = random_dpn(s)
        s += 1
        try:
            abstract_graph(net, cfg)
        except ExplorationError:
            continue
        nets.append(net)
    return nets


# --------------------------------------------------------------------------
# Decision tasks simulated directly


@dataclass(frozen=True)
class DecisionCase:
    """A host net with one decision task at ``at`` (a table plus branches)."""

    host: DPN
    at: str
    table: DecisionTable
    branches: tuple
    siblings: int = 0
    name: str = "case"

    def compiled(self) -> DPN:
        return embed_fragment(self.host, self.at, compile_table(self.table, self.branches), self.siblings)


def direct_net(case: DecisionCase) -> tuple[DPN, str]:
    """Host with the decision task as a single transition ``d: at -> q_d``.

    Branch targets consume ``q_d`` instead of ``at`` and are guarded by
    the disjunction of their branch guards.
    """
    host, tbl = case.host, case.table
    d, q = f"{tbl.name}_task", f"{tbl.name}_decided"
    by_target: dict = {}
    for b in case.branches:
        by_target.setdefault(b.target, []).append(b.guard)
    arcs = set(host.arcs)
    transitions = []
    for t in host.transitions:
        if t.id in by_target:
            arcs.discard((case.at, t.id))
            arcs.add((q, t.id))
            extra = disj(by_target[t.id])
            guard = extra if t.guard is None else And(t.guard, extra)
            transitions.append(Transition(t.id, guard, t.reads | set(tbl.output_names), t.writes, t.label, t.invisible))
        else:
            transitions.append(t)
    transitions.append(Transition(d, None, frozenset(v.name for v in tbl.inputs), frozenset(tbl.output_names)))
    arcs |= {(case.at, d), (d, q)}
    variables = list(host.variables) + [v for v in tbl.outputs if v.name not in host.variable_map]
    alpha = dict(host.initial_assignment)
    alpha.update({v.name: UNDEFINED for v in tbl.outputs if v.name not in alpha})
    net = host.replace(
        places=tuple(host.places) + (q,),
        transitions=tuple(transitions),
        arcs=frozenset(arcs),
        variables=tuple(variables),
        initial_assignment=Assignment(alpha),
    )
    return net, d


def direct_report(case: DecisionCase, cfg: ExplorationConfig | None = None) -> SoundnessReport:
    """Soundness of the host where the decision task evaluates its table when it fires.

    The task always fires; it writes the outputs of the matching rule, or
    leaves them undefined if no rule matches.  Written values of the other
    transitions range over the representatives of the compiled net.
    """
    cfg = cfg or ExplorationConfig()
    net, d = direct_net(case)
    compiled = case.compiled()
    choices = build_representatives(compiled).write_choices()
    choices = {v.name: choices.get(v.name, ()) for v in net.variables}
    tbl = case.table
    labels = [f"{d}#r{i + 1}" for i in range(len(tbl.rules))]
    ordinary = [t for t in net.transitions if t.id != d]
    plain = net.replace(transitions=tuple(ordinary))

    def successors(state):
        for f, s in legal_firings(plain, state, choices):
            yield f.transition, tuple(sorted(f.written().items())), s
        if control_enabled(net, state.marking, d):
            i = matching_rule(tbl, state.assignment)
            if i is None:
                updates, label = {n: UNDEFINED for n in tbl.output_names}, f"{d}#none"
            else:
                updates, label = tbl.output_values(i), labels[i]
            alpha = state.assignment.replace(updates)
            yield label, tuple(sorted(updates.items())), DpnState(move_tokens(net, state.marking, d), alpha)

    preset = dict(net.preset)
    for label in labels + [f"{d}#none"]:
        preset[label] = preset[d]
    names = [t.id for t in ordinary] + labels
    g = ReachabilityGraph(names, net.final_marking, preset, invisible=[t.id for t in ordinary if t.invisible])
    bfs(g, net.initial_state(), successors, lambda s: s.marking, lambda s: s, cfg)
    return analyse_graph(g, transitions=names, model=case.name)


COMPARED = ("P1", "P2", "P3", "P2b", "P1b")


def verdicts(r: SoundnessReport) -> dict:
    out = {p: r.properties[p].holds for p in COMPARED}
    out["data-aware"] = r.notions["data-aware"]
    return out


def random_decision_case(seed: int) -> DecisionCase:
    """A seeded host with one decision task over integer inputs.

    Inputs are written before the decision and never concurrently with it;
    branch targets carry no guards of their own.
    """
    rng = random.Random(seed)
    x = TypedVariable("x", INT)
    y = TypedVariable("y", INT)
    cut = sorted(rng.sample(range(0, 11), rng.randint(1, 3)))
    tests = []
    bounds = [None, *cut, None]
    for lo, hi in zip(bounds, bounds[1:]):
        if lo is None:
            tests.append(f"< {hi}")
        elif hi is None:
            tests.append(f">= {lo}")
        else:
            tests.append(f"[{lo}..{hi})")
    literals = ['"a"', '"b"', '"c"']
    rules = []
    for test in tests:
        if rng.random() < 0.15:
            continue
        second = rng.choice(["-", "-", f"< {rng.randint(0, 10)}"])
        if second != "-":
            k = second.split()[1]
            rules.append(Rule((test, second), (rng.choice(literals),)))
            rules.append(Rule((test, f">= {k}"), (rng.choice(literals),)))
        else:
            rules.append(Rule((test, "-"), (rng.choice(literals),)))
    if not rules:
        rules.append(Rule(("-", "-"), ('"a"',)))
    out = TypedVariable("kind", STRING)
    tbl = DecisionTable(
        "dec",
        (x, y),
        (out,),
        tuple(Rule(r.inputs, tuple(v.strip('"') for v in r.outputs)) for r in rules),
    )

    ntargets = rng.randint(1, 3)
    targets = [f"handle{k}" for k in range(ntargets)]
    covered = literals if rng.random() < 0.7 else literals[: rng.randint(1, 2)]
    branches = []
    for k, lit in enumerate(covered):
        branches.append(Branch(Compare(Occ("kind"), EQ, lit.strip('"')), targets[k % ntargets]))

    places = ["i", "p0", "at", "q", "o"]
    ts = [Transition("start"), Transition("collect", _write_guard(rng), writes=frozenset({"x", "y"}))]
    arcs = {("i", "start"), ("start", "p0"), ("p0", "collect"), ("collect", "at")}
    for tgt in targets:
        ts.append(Transition(tgt))
        arcs |= {("at", tgt), (tgt, "q")}
    ts.append(Transition("finish", _read_guard(rng) if rng.random() < 0.3 else None))
    arcs |= {("q", "finish"), ("finish", "o")}
    if rng.random() < 0.4:
        ts.append(Transition("redo", Compare(Occ("x"), rng.choice([LT, GT]), rng.randint(0, 10))))
        arcs |= {("q", "redo"), ("redo", "p0")}
    siblings = 0
    if rng.random() < 0.4:
        ts.append(Transition("withdraw", _read_guard(rng) if rng.random() < 0.5 else None))
        arcs |= {("at", "withdraw"), ("withdraw", "o")}
        siblings = 1
    host = make_net(places, ts, arcs, [x, y], {}, {"i": 1}, {"o": 1}, name=f"decision-{seed}")
    return DecisionCase(host, "at", tbl, tuple(branches), siblings, f"decision-{seed}")


def _write_guard(rng):
    if rng.random() < 0.4:
        return None
    return And(
        Compare(Occ("x", True), rng.choice([GT, LT, NE]), rng.randint(0, 10)),
        Or(Defined(Occ("y", True)), Compare(Occ("y", True), EQ, rng.randint(0, 10))),
    )


def _read_guard(rng):
    return Compare(Occ(rng.choice(["x", "y"])), rng.choice([LT, GT, NE]), rng.randint(0, 10))
