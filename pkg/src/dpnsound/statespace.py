"""Reachability graphs: breadth-first exploration with canonical state keys."""
from __future__ import annotations

import logging
from collections import deque
from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Hashable, Iterable

from .cpn import BLACK_SET, CPN, DOT, _fire_unchecked, binding_digest, fire_cpn, legal_bindings
from .dpn import Marking

log = logging.getLogger(__name__)


class ExplorationError(RuntimeError):
    pass


class TokenBoundExceeded(ExplorationError):
    def __init__(self, place: str, bound: int, witness: list):
        super().__init__(
            f"place {place!r} exceeds {bound} tokens after {len(witness)} firings; the net may be unbounded"
        )
        self.place = place
        self.bound = bound
        self.witness = witness


class NodeBudgetExceeded(ExplorationError):
    def __init__(self, limit: int):
        super().__init__(f"state space exceeds {limit} nodes")
        self.limit = limit


@dataclass(frozen=True)
class ExplorationConfig:
    max_tokens_per_place: int = 4
    max_nodes: int = 1_000_000
    parallelism: int = 1
    validate: bool = False

    def __post_init__(self):
        if self.max_tokens_per_place < 1 or self.max_nodes < 1 or self.parallelism < 1:
            raise ValueError("exploration bounds must be positive")


@dataclass(frozen=True)
class Edge:
    src: int
    transition: str
    digest: tuple
    dst: int


class ReachabilityGraph:
    """Explored state graph.

    ``nodes[i]`` is the state object (a CPN marking, or a DPN state for the
    concrete and direct-simulation explorers) and ``control[i]`` its
    projection on the control places.
    """

    def __init__(self, transitions: Iterable[str], final_marking: Marking, preset, labels=None, invisible=()):
        self.transitions = tuple(transitions)
        self.preset = dict(preset)
        self.final_marking = final_marking
        self.labels = dict(labels or {})
        self.invisible = frozenset(invisible)
        self.nodes: list = []
        self.control: list = []
        self.edges: list = []
        self.out: list = []
        self.parent: list = []
        self.depth: list = []
        self.initial = 0

    def _add_node(self, state, control: Marking, parent_edge: int | None, depth: int) -> int:
        self.nodes.append(state)
        self.control.append(control)
        self.out.append([])
        self.parent.append(parent_edge)
        self.depth.append(depth)
        return len(self.nodes) - 1

    def _add_edge(self, src: int, transition: str, digest: tuple, dst: int) -> int:
        self.edges.append(Edge(src, transition, digest, dst))
        idx = len(self.edges) - 1
        self.out[src].append(idx)
        return idx

    def __len__(self):
        return len(self.nodes)

    def successors(self, node: int) -> list:
        return [self.edges[e].dst for e in self.out[node]]

    def out_edges(self, node: int) -> list:
        return [self.edges[e] for e in self.out[node]]

    @cached_property
    def final_nodes(self) -> frozenset:
        return frozenset(i for i, m in enumerate(self.control) if m == self.final_marking)

    @cached_property
    def deadlock_nodes(self) -> frozenset:
        finals = self.final_nodes
        return frozenset(i for i in range(len(self.nodes)) if not self.out[i] and i not in finals)

    @cached_property
    def predecessors(self) -> list:
        preds = [[] for _ in self.nodes]
        for e in self.edges:
            preds[e.dst].append(e.src)
        return preds

    def control_enabled(self, node: int, transition: str) -> bool:
        m = self.control[node]
        return all(m[p] > 0 for p in self.preset[transition])

    @cached_property
    def fired_transitions(self) -> frozenset:
        return frozenset(e.transition for e in self.edges)

    def witness_edges(self, node: int) -> list:
        path = []
        e = self.parent[node]
        while e is not None:
            edge = self.edges[e]
            path.append(edge)
            e = self.parent[edge.src]
        path.reverse()
        return path


def backward_reach(g: ReachabilityGraph, targets: Iterable[int]) -> set:
    seen = set(targets)
    queue = deque(seen)
    preds = g.predecessors
    while queue:
        n = queue.popleft()
        for p in preds[n]:
            if p not in seen:
                seen.add(p)
                queue.append(p)
    return seen


def shortest_witness(g: ReachabilityGraph, to: int) -> list:
    """Minimum-length firing sequence from the initial node to ``to``.

    Returns ``[(transition, digest), ...]``; ties follow edge enumeration
    order because parents are recorded at BFS discovery.
    """
    if not 0 <= to < len(g.nodes):
        raise ValueError(f"node {to} is not in the graph")
    return [(e.transition, e.digest) for e in g.witness_edges(to)]


def bfs(
    graph: ReachabilityGraph,
    initial,
    successors: Callable[[object], Iterable[tuple]],
    control_of: Callable[[object], Marking],
    key_of: Callable[[object], Hashable],
    cfg: ExplorationConfig,
) -> ReachabilityGraph:
    """Fill ``graph`` by BFS from ``initial``.

    ``successors(state)`` yields ``(transition, digest, next_state)`` in a
    deterministic order.
    """
    index = {key_of(initial): 0}
    graph._add_node(initial, control_of(initial), None, 0)
    _check_bound(graph, 0, cfg)
    head = 0
    while head < len(graph.nodes):
        src = head
        head += 1
        state = graph.nodes[src]
        for transition, digest, nxt in successors(state):
            key = key_of(nxt)
            dst = index.get(key)
            if dst is None:
                if len(graph.nodes) >= cfg.max_nodes:
                    raise NodeBudgetExceeded(cfg.max_nodes)
                dst = graph._add_node(nxt, control_of(nxt), None, graph.depth[src] + 1)
                index[key] = dst
                e = graph._add_edge(src, transition, digest, dst)
                graph.parent[dst] = e
                _check_bound(graph, dst, cfg)
            else:
                graph._add_edge(src, transition, digest, dst)
    log.debug("explored %d nodes, %d edges", len(graph.nodes), len(graph.edges))
    return graph


def _check_bound(graph: ReachabilityGraph, node: int, cfg: ExplorationConfig):
    for place, n in graph.control[node].items():
        if n > cfg.max_tokens_per_place:
            witness = shortest_witness(graph, node)
            raise TokenBoundExceeded(place, cfg.max_tokens_per_place, witness)


class InvariantViolation(ExplorationError):
    pass


def _check_invariants(cpn: CPN, mk, rho: dict):
    for v, p in cpn.variable_places.items():
        if mk.count(p) != 1:
            raise InvariantViolation(f"variable place {p} holds {mk.count(p)} tokens")
    for p, toks in rho.items():
        if mk.tokens(p) != toks:
            raise InvariantViolation(f"restriction place {p} changed")


def graph_to_json(g: ReachabilityGraph) -> dict:
    """Adjacency dump for debugging: control markings plus labelled edges."""
    return {
        "initial": g.initial,
        "nodes": [{"id": i, "marking": m.as_dict(), "final": i in g.final_nodes} for i, m in enumerate(g.control)],
        "edges": [
            {"src": e.src, "dst": e.dst, "transition": e.transition, "writes": [[v, repr(x)] for v, x in e.digest]}
            for e in g.edges
        ],
    }


def explore(cpn: CPN, cfg: ExplorationConfig | None = None) -> ReachabilityGraph:
    cfg = cfg or ExplorationConfig()
    restriction = set(cpn.restriction_places.values())
    key_places = tuple(p for p in cpn.places if p not in restriction)
    control_places = cpn.control_places
    transitions = cpn.transitions

    step = fire_cpn if cfg.validate else _fire_unchecked
    rho = {p: cpn.init.tokens(p) for p in restriction}

    def successors(mk):
        if cfg.validate:
            _check_invariants(cpn, mk, rho)
        for t in transitions:
            for gamma in legal_bindings(cpn, mk, t):
                yield t, binding_digest(cpn, t, gamma), step(cpn, mk, t, gamma)

    def control_of(mk):
        return Marking({p: mk.count(p) for p in control_places})

    preset = {t: tuple(p for p, e in cpn.inputs[t] if e is DOT and cpn.colorsets[p] == BLACK_SET) for t in transitions}
    graph = ReachabilityGraph(transitions, cpn.final_marking, preset, cpn.labels, cpn.invisible)
    return bfs(graph, cpn.init, successors, control_of, lambda mk: mk.project(key_places), cfg)

