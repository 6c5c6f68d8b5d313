from collections import Counter

import pytest
from hypothesis import given, settings, strategies as st

from dpnsound.abstraction import build_representatives
from dpnsound.cpn import (
    BLACK,
    BLACK_SET,
    CPN,
    DOT,
    CpnArc,
    CpnMarking,
    IllegalBinding,
    MalformedMarking,
    fire_cpn,
    guard_variable_violations,
    legal_bindings,
    marking_to_state,
    state_to_marking,
    to_json,
    translate,
)
from dpnsound.dpn import Assignment, DpnState, Marking, legal_firings
from dpnsound.guards import STRING, UNDEFINED, Occ, TypedVariable, parse_guard
from dpnsound.oracle import random_dpn
from dpnsound.statespace import ExplorationConfig, ExplorationError, explore

from conftest import load


def _cpn(net):
    return translate(net, build_representatives(net))


def arcs_of(cpn, node):
    return sorted((a.src, a.dst, str(a.expr)) for a in cpn.arcs if node in (a.src, a.dst))


def test_simple_translation_structure():
    net = load("fig6_simple")
    cpn = _cpn(net)
    assert cpn.places == ("i", "p", "o", "var_x", "rep_x")
    assert cpn.variable_places == {"x": "var_x"}
    assert cpn.init.multiset("var_x") == Counter([0])
    assert [a for a in arcs_of(cpn, "var_x")] == [
        ("A", "var_x", "x'"),
        ("B", "var_x", "x"),
        ("var_x", "A", "x"),
        ("var_x", "B", "x"),
    ]
    assert arcs_of(cpn, "rep_x") == [("A", "rep_x", "x'"), ("rep_x", "A", "x'")]
    assert cpn.colorsets["p"] == BLACK_SET
    assert guard_variable_violations(cpn) == []


def test_loan_translation(fig1):
    cpn = _cpn(fig1)
    assert set(cpn.variable_places) == {"amount", "ok"}
    assert cpn.init.count("rep_amount") == 7
    assert cpn.init.colors("var_amount") == [UNDEFINED]
    assert cpn.init.colors("var_ok") == [UNDEFINED]
    assert cpn.guards["simple assessment"] == fig1.transition("simple assessment").guard
    assert cpn.labels["credit request"] == "credit request"


def test_no_variable_net_is_the_petri_net():
    net = load("linear")
    cpn = _cpn(net)
    assert cpn.places == tuple(net.places)
    assert all(a.expr is DOT for a in cpn.arcs)
    assert sorted((a.src, a.dst) for a in cpn.arcs) == sorted(net.arcs)


def test_fresh_names_avoid_clashes():
    from dpnsound.dpn import Transition, make_net
    from dpnsound.guards import INT

    x = TypedVariable("x", INT)
    net = make_net(["var_x", "o"], [Transition("t", parse_guard("x' > 1", [x]))], [("var_x", "t"), ("t", "o")],
                   [x], initial_marking={"var_x": 1}, final_marking={"o": 1})
    cpn = _cpn(net)
    assert cpn.variable_places["x"] == "_var_x"


def _check_low_cpn():
    q = Occ("q")
    return CPN(
        places=("in", "out"),
        transitions=("check_low",),
        arcs=(CpnArc("in", "check_low", q), CpnArc("check_low", "out", q)),
        colorsets={"in": STRING, "out": STRING},
        guards={"check_low": parse_guard('q == "low"', [TypedVariable("q", STRING)])},
        init=CpnMarking({"in": ["high", "low"]}),
    )


def test_check_low_takes_only_the_low_token():
    cpn = _check_low_cpn()
    bindings = legal_bindings(cpn, cpn.init, "check_low")
    assert [dict(b.items()) for b in bindings] == [{Occ("q"): "low"}]
    after = fire_cpn(cpn, cpn.init, "check_low", bindings[0])
    assert after.colors("in") == ["high"]
    assert after.colors("out") == ["low"]
    assert legal_bindings(cpn, after, "check_low") == []
    with pytest.raises(IllegalBinding):
        fire_cpn(cpn, cpn.init, "check_low", {Occ("q"): "high"})


def test_credit_request_bindings(fig1):
    cpn = _cpn(fig1)
    bindings = legal_bindings(cpn, cpn.init, "credit request")
    assert len(bindings) == 7
    assert sorted(b[Occ("amount", True)] for b in bindings) == [4999, 5000, 5001, 10000, 10001, 15000, 15001]
    assert legal_bindings(cpn, cpn.init, "verify") == []


def test_fire_write_and_read():
    cpn = _cpn(load("fig6_simple"))
    gamma = {DOT: BLACK, Occ("x"): 0, Occ("x", True): cpn.init.colors("rep_x")[-1]}
    mk = fire_cpn(cpn, cpn.init, "A", gamma)
    written = gamma[Occ("x", True)]
    assert mk.colors("var_x") == [written]
    assert mk.tokens("rep_x") == cpn.init.tokens("rep_x")
    (b,) = legal_bindings(cpn, mk, "B")
    mk2 = fire_cpn(cpn, mk, "B", b)
    assert mk2.colors("var_x") == [written]
    assert mk2.count("o") == 1 and mk2.count("p") == 0


def test_fire_rejects_bad_bindings():
    cpn = _cpn(load("fig6_simple"))
    with pytest.raises(IllegalBinding):
        fire_cpn(cpn, cpn.init, "A", {DOT: BLACK, Occ("x"): 0})
    with pytest.raises(IllegalBinding):
        fire_cpn(cpn, cpn.init, "A", {DOT: BLACK, Occ("x"): 0, Occ("x", True): 12345})
    with pytest.raises(IllegalBinding):
        fire_cpn(cpn, cpn.init, "B", {DOT: BLACK, Occ("x"): 0})


def test_state_marking_correspondence(fig1):
    cpn = _cpn(fig1)
    s0 = fig1.initial_state()
    assert state_to_marking(s0, cpn) == cpn.init
    s = DpnState(Marking({"p5": 1, "p6": 1}), Assignment({"amount": 5001, "ok": False}))
    mk = state_to_marking(s, cpn)
    assert mk.count("p5") == 1 and mk.count("p6") == 1 and mk.count("o") == 0
    assert marking_to_state(mk, cpn) == s


def test_malformed_marking(fig1):
    cpn = _cpn(fig1)
    data = {p: list(Counter(dict(cpn.init.tokens(p))).elements()) for p in cpn.places}
    data["var_ok"] = [True, False]
    with pytest.raises(MalformedMarking):
        marking_to_state(CpnMarking(data), cpn)


def test_to_json_roles(fig1):
    doc = to_json(_cpn(fig1))
    roles = {p["id"]: p["role"] for p in doc["places"]}
    assert roles["p1"] != roles["var_amount"] != roles["rep_amount"]


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000))
def test_bisimulation_with_dpn_firings(seed):
    net = random_dpn(seed)
    repmap = build_representatives(net)
    cpn = translate(net, repmap)
    assert guard_variable_violations(cpn) == []
    choices = repmap.write_choices()
    try:
        g = explore(cpn, ExplorationConfig(max_tokens_per_place=3, max_nodes=3000, validate=True))
    except ExplorationError:
        return  # unbounded or too large
    for mk in g.nodes:
        s = marking_to_state(mk, cpn)
        assert state_to_marking(s, cpn) == mk
        for t in cpn.transitions:
            via_cpn = sorted(
                (repr(marking_to_state(fire_cpn(cpn, mk, t, b), cpn)) for b in legal_bindings(cpn, mk, t))
            )
            via_dpn = sorted(repr(nxt) for f, nxt in legal_firings(net, s, choices) if f.transition == t)
            assert via_cpn == via_dpn
