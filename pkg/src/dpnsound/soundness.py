"""Soundness properties decided on a reachability graph.

Property names follow the usual decomposition of data-aware soundness
(P1 option to complete, P2 proper completion, P3 no dead transitions)
and its decision-aware relatives (P4 conditional completeness, P5
conditional output coverage, P2b at most one token in the output place,
P1b some run completes).
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Iterable, Mapping

import networkx as nx

from .abstraction import RepresentativeMap, build_representatives
from .cpn import translate
from .dpn import DPN, Assignment, DpnState, Marking, TransitionFiring, fire
from .guards import UNDEFINED, Occ
from .statespace import ExplorationConfig, ReachabilityGraph, backward_reach, explore

PROPERTY_NAMES = ("P1", "P2", "P3", "P4", "P5", "P2b", "P1b")
DATA_AWARE = ("P1", "P2", "P3")

NOTIONS = {
    "data-aware": ("P1", "P2", "P3"),
    "decision-aware": ("P1", "P2", "P3"),
    "decision-aware-relaxed": ("P3", "P4", "P5"),
    "decision-aware-weak": ("P1", "P2", "P4"),
    "decision-aware-lazy": ("P1", "P2b"),
    "decision-aware-easy": ("P1b",),
}

MAX_FINDINGS = 50


class SoundnessError(ValueError):
    pass


@dataclass(frozen=True)
class WitnessStep:
    transition: str
    writes: tuple = ()
    classes: tuple = ()


@dataclass(frozen=True)
class Finding:
    """A reachable offending marking plus a shortest run reaching it."""

    marking: Marking
    witness: tuple
    cycle: tuple = ()
    decision: tuple = ()
    node: int | None = None


@dataclass(frozen=True)
class Verdict:
    holds: bool
    vacuous: bool = False
    evidence: tuple = ()


@dataclass
class SoundnessReport:
    model: str
    properties: dict
    notions: dict
    dead_transitions: tuple = ()
    deadlocks: tuple = ()
    livelocks: tuple = ()
    improper_completions: tuple = ()
    stats: dict = field(default_factory=dict)
    invisible: frozenset = frozenset()

    def holds(self, names: Iterable[str] | None = None) -> bool:
        names = tuple(names) if names is not None else tuple(self.properties)
        return all(self.properties[n].holds for n in names if n in self.properties)

    @property
    def data_aware_sound(self) -> bool:
        return self.notions["data-aware"]


def _steps(g: ReachabilityGraph, node: int, repmap: RepresentativeMap | None) -> tuple:
    return tuple(_step(e.transition, e.digest, repmap) for e in g.witness_edges(node))


def _step(transition: str, digest: tuple, repmap: RepresentativeMap | None) -> WitnessStep:
    classes = ()
    if repmap is not None:
        classes = tuple(
            (v, repmap.describe(v, x)) for v, x in digest if v in repmap.variables and repmap.describe(v, x)
        )
    return WitnessStep(transition, tuple(digest), classes)


def _by_marking(g: ReachabilityGraph, nodes: Iterable[int], repmap) -> tuple:
    """One finding per distinct control marking, using its BFS-earliest node."""
    seen = {}
    for n in sorted(nodes):
        m = g.control[n]
        if m not in seen:
            seen[m] = n
    findings = [Finding(m, _steps(g, n, repmap), node=n) for m, n in seen.items()]
    findings.sort(key=lambda f: f.node)
    return tuple(findings[:MAX_FINDINGS])


def deadlocks(g: ReachabilityGraph, repmap=None) -> tuple:
    return _by_marking(g, g.deadlock_nodes, repmap)


def livelocks(g: ReachabilityGraph, coreachable: set, repmap=None) -> tuple:
    """Cycles from which no final marking can be reached."""
    bad = [n for n in range(len(g.nodes)) if n not in coreachable and n not in g.deadlock_nodes]
    if not bad:
        return ()
    sub = nx.DiGraph()
    sub.add_nodes_from(bad)
    badset = set(bad)
    for n in bad:
        for e in g.out[n]:
            d = g.edges[e].dst
            if d in badset:
                sub.add_edge(n, d, edge=e)
    found = []
    for comp in nx.strongly_connected_components(sub):
        if len(comp) == 1:
            (n,) = comp
            if not sub.has_edge(n, n):
                continue
        start = min(comp)
        found.append((start, _cycle(g, sub, comp, start, repmap)))
    found.sort()
    return tuple(
        Finding(g.control[n], _steps(g, n, repmap), cycle=cycle, node=n) for n, cycle in found[:MAX_FINDINGS]
    )


def _cycle(g, sub, comp, start, repmap) -> tuple:
    # BFS inside the component back to ``start``.
    parent = {}
    frontier = [start]
    while frontier:
        nxt = []
        for n in frontier:
            for _, d, data in sorted(sub.out_edges(n, data=True), key=lambda x: x[2]["edge"]):
                if d not in comp:
                    continue
                if d == start:
                    path = [data["edge"]]
                    while n != start:
                        e = parent[n]
                        path.append(e)
                        n = g.edges[e].src
                    path.reverse()
                    return tuple(_step(g.edges[e].transition, g.edges[e].digest, repmap) for e in path)
                if d not in parent:
                    parent[d] = data["edge"]
                    nxt.append(d)
        frontier = nxt
    return ()


def check_p1(g: ReachabilityGraph, repmap=None) -> Verdict:
    co = backward_reach(g, g.final_nodes)
    if len(co) == len(g.nodes):
        return Verdict(True)
    evidence = deadlocks(g, repmap) + livelocks(g, co, repmap)
    if not evidence:
        stuck = [n for n in range(len(g.nodes)) if n not in co]
        evidence = _by_marking(g, stuck[:1], repmap)
    return Verdict(False, evidence=evidence)


def improper_completions(g: ReachabilityGraph, repmap=None) -> tuple:
    fm = g.final_marking
    nodes = [n for n, m in enumerate(g.control) if m >= fm and m != fm]
    return _by_marking(g, nodes, repmap)


def check_p2(g: ReachabilityGraph, repmap=None) -> Verdict:
    found = improper_completions(g, repmap)
    return Verdict(not found, evidence=found)


def dead_transitions(g: ReachabilityGraph, transitions: Iterable[str] | None = None) -> tuple:
    fired = g.fired_transitions
    return tuple(t for t in (transitions or g.transitions) if t not in fired)


def check_p3(g: ReachabilityGraph, transitions: Iterable[str] | None = None) -> Verdict:
    dead = dead_transitions(g, transitions)
    return Verdict(not dead, evidence=dead)


def check_p4(g: ReachabilityGraph, decisions: Iterable[Iterable[str]], repmap=None) -> Verdict:
    decisions = [tuple(sorted(d)) for d in decisions]
    if not decisions:
        return Verdict(True, vacuous=True)
    evidence = []
    for group in decisions:
        members = set(group)
        for n in range(len(g.nodes)):
            if not any(g.control_enabled(n, t) for t in group):
                continue
            if any(g.edges[e].transition in members for e in g.out[n]):
                continue
            evidence.append(Finding(g.control[n], _steps(g, n, repmap), decision=group, node=n))
            break
    return Verdict(not evidence, evidence=tuple(evidence))


def check_p5(g: ReachabilityGraph, decisions: Iterable[Iterable[str]], repmap=None) -> Verdict:
    decisions = [tuple(sorted(d)) for d in decisions]
    if not decisions:
        return Verdict(True, vacuous=True)
    owner = {t: group for group in decisions for t in group}
    finals = g.final_nodes
    evidence, reported = [], set()
    for e in g.edges:
        group = owner.get(e.transition)
        if group is None or group in reported:
            continue
        if e.dst in finals or g.out[e.dst]:
            continue
        reported.add(group)
        evidence.append(Finding(g.control[e.dst], _steps(g, e.dst, repmap), decision=group, node=e.dst))
    return Verdict(not evidence, evidence=tuple(evidence))


def output_place(final_marking: Marking) -> str:
    places = final_marking.places()
    if len(places) != 1:
        raise SoundnessError(
            f"P2b needs a single output place but the final marking is {final_marking}"
        )
    return places[0]


def check_p2b(g: ReachabilityGraph, out_place: str, repmap=None) -> Verdict:
    nodes = [n for n, m in enumerate(g.control) if m[out_place] >= 2]
    found = _by_marking(g, nodes, repmap)
    return Verdict(not found, evidence=found)


def check_p1b(g: ReachabilityGraph, repmap=None) -> Verdict:
    finals = sorted(g.final_nodes)
    if not finals:
        return Verdict(False)
    return Verdict(True, evidence=(Finding(g.control[finals[0]], _steps(g, finals[0], repmap), node=finals[0]),))


def classify(verdicts: Mapping[str, bool]) -> dict:
    """Named soundness notions from per-property truth values.

    Notions whose ingredients were not all computed are omitted.
    """
    return {
        name: all(verdicts[p] for p in parts)
        for name, parts in NOTIONS.items()
        if all(p in verdicts for p in parts)
    }


def analyse_graph(
    g: ReachabilityGraph,
    *,
    decisions: Iterable[Iterable[str]] = (),
    repmap: RepresentativeMap | None = None,
    properties: str = "all",
    transitions: Iterable[str] | None = None,
    model: str = "net",
) -> SoundnessReport:
    if properties not in ("all", "data-aware"):
        raise ValueError(f"unknown property suite {properties!r}")
    decisions = [tuple(sorted(d)) for d in decisions]
    co = backward_reach(g, g.final_nodes)
    props = {
        "P1": check_p1(g, repmap),
        "P2": check_p2(g, repmap),
        "P3": check_p3(g, transitions),
    }
    if properties == "all":
        props["P4"] = check_p4(g, decisions, repmap)
        props["P5"] = check_p5(g, decisions, repmap)
        props["P2b"] = check_p2b(g, output_place(g.final_marking), repmap)
        props["P1b"] = check_p1b(g, repmap)
    notions = classify({k: v.holds for k, v in props.items()})
    return SoundnessReport(
        model=model,
        properties=props,
        notions=notions,
        dead_transitions=props["P3"].evidence,
        deadlocks=deadlocks(g, repmap),
        livelocks=livelocks(g, co, repmap),
        improper_completions=props["P2"].evidence,
        stats={"nodes": len(g.nodes), "edges": len(g.edges)},
        invisible=g.invisible,
    )


def replay_witness(net: DPN, steps: Iterable[WitnessStep], start: DpnState | None = None) -> DpnState:
    """Fire ``steps`` on ``net`` with the concrete firing rule; raises on an illegal step."""
    state = start or net.initial_state()
    for step in steps:
        t = net.transition(step.transition)
        writes = dict(step.writes)
        beta = {Occ(v, False): state.assignment.get(v, UNDEFINED) for v in t.reads}
        beta.update({Occ(v, True): writes[v] for v in t.writes})
        state = fire(net, state, TransitionFiring(t.id, Assignment(beta)))
    return state


def check(
    net: DPN,
    cfg: ExplorationConfig | None = None,
    properties: str = "all",
    decisions: Iterable[Iterable[str]] | None = None,
) -> SoundnessReport:
    """Translate ``net``, explore the abstract state space and decide the properties."""
    start = time.perf_counter()
    repmap = build_representatives(net)
    graph = explore(translate(net, repmap), cfg)
    report = analyse_graph(
        graph,
        decisions=net.decisions if decisions is None else decisions,
        repmap=repmap,
        properties=properties,
        model=net.name,
    )
    report.stats["seconds"] = round(time.perf_counter() - start, 6)
    return report
