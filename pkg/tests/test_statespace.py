import json

import pytest

from dpnsound.abstraction import build_representatives
from dpnsound.cpn import translate
from dpnsound.dpn import Marking, Transition, make_net
from dpnsound.statespace import (
    ExplorationConfig,
    NodeBudgetExceeded,
    TokenBoundExceeded,
    backward_reach,
    explore,
    graph_to_json,
    shortest_witness,
)

from conftest import load


def graph(net, cfg=None):
    return explore(translate(net, build_representatives(net)), cfg)


def test_single_transition_net():
    g = graph(load("linear"))
    assert len(g.nodes) == 2 and len(g.edges) == 1
    assert g.final_nodes == {1}
    assert backward_reach(g, g.final_nodes) == {0, 1}
    assert backward_reach(g, ()) == set()
    assert shortest_witness(g, 0) == []


def test_token_generator_hits_the_bound():
    net = make_net(["p", "o"], [Transition("t")], [("p", "t"), ("t", "p"), ("t", "o")],
                   initial_marking={"p": 1}, final_marking={"o": 1})
    with pytest.raises(TokenBoundExceeded) as exc:
        graph(net, ExplorationConfig(max_tokens_per_place=4))
    assert exc.value.place == "o" and exc.value.bound == 4
    assert len(exc.value.witness) == 5


def test_node_budget():
    with pytest.raises(NodeBudgetExceeded):
        graph(load("fig1_loan"), ExplorationConfig(max_nodes=10))


def test_bad_config():
    with pytest.raises(ValueError):
        ExplorationConfig(max_tokens_per_place=0)


def test_loan_graph_has_the_deadlock(fig1):
    g = graph(fig1)
    assert len(g.nodes) == 92
    stuck = [n for n in g.deadlock_nodes if g.control[n] == Marking({"p5": 1, "p6": 1})]
    assert stuck
    co = backward_reach(g, g.final_nodes)
    assert not co & set(stuck)
    w = shortest_witness(g, stuck[0])
    assert len(w) == g.depth[stuck[0]]
    assert ("verify", (("ok", False),)) in w


def test_witness_is_shortest(fig1):
    g = graph(fig1)
    for n in range(len(g.nodes)):
        assert len(shortest_witness(g, n)) == g.depth[n]
    with pytest.raises(ValueError):
        shortest_witness(g, len(g.nodes))


def test_exploration_is_deterministic(fig1):
    a, b = graph(fig1), graph(fig1)
    assert json.dumps(graph_to_json(a), sort_keys=True) == json.dumps(graph_to_json(b), sort_keys=True)


def test_validate_mode_gives_the_same_graph(fig1):
    fast, slow = graph(fig1), graph(fig1, ExplorationConfig(validate=True))
    assert graph_to_json(fast) == graph_to_json(slow)


def test_keys_ignore_restriction_places():
    g = graph(load("fig6_simple"))
    # A writes x once per representative; each value is a distinct node.
    assert len(g.nodes) == 1 + 2 * len(build_representatives(load("fig6_simple")).representatives("x"))


def test_graph_json_shape():
    doc = graph_to_json(graph(load("linear")))
    assert doc["initial"] == 0
    assert doc["nodes"][1] == {"id": 1, "marking": {"o": 1}, "final": True}
    assert doc["edges"][0]["transition"] == "t"
