import pytest

from dpnsound.dmn import (
    Branch,
    DecisionTable,
    DmnError,
    OverlappingRules,
    Rule,
    UnknownPlace,
    UnsupportedHitPolicy,
    check_unique,
    compile_table,
    embed_fragment,
    matching_rule,
    parse_sfeel,
)
from dpnsound.dpn import Transition, make_net
from dpnsound.guards import (
    BOOL,
    INT,
    REAL,
    STRING,
    ConstantKindMismatch,
    GuardSyntaxError,
    Occ,
    PredicateNotPermitted,
    TypedVariable,
    format_guard,
    parse_guard,
)
from dpnsound.io import load_model
from dpnsound.oracle import DecisionCase, direct_report, random_decision_case
from dpnsound.soundness import check

from conftest import fig4, fixture_path, load

AMOUNT = TypedVariable("amount", INT)
OK = TypedVariable("ok", BOOL)
KIND = TypedVariable("kind", STRING)
RATE = TypedVariable("rate", REAL)


@pytest.mark.parametrize(
    "test,var,expected",
    [
        ("-", AMOUNT, "defined(amount)"),
        ("<= 5000", AMOUNT, "amount < 5000 || amount == 5000"),
        ("> 5000", AMOUNT, "amount > 5000"),
        ("[1..3]", AMOUNT, "(amount > 1 || amount == 1) && (amount < 3 || amount == 3)"),
        ("(1..3)", AMOUNT, "amount > 1 && amount < 3"),
        ("]1..3[", AMOUNT, "amount > 1 && amount < 3"),
        ("[0.5..1)", RATE, "(rate > 0.5 || rate == 0.5) && rate < 1.0"),
        ("true", OK, "ok == true"),
        ('"gold","silver"', KIND, 'kind == "gold" || kind == "silver"'),
        ("1, 2", AMOUNT, "amount == 1 || amount == 2"),
    ],
)
def test_unary_tests(test, var, expected):
    assert format_guard(parse_sfeel(test, var)) == expected


@pytest.mark.parametrize(
    "test,var,error",
    [
        ("< 3", KIND, PredicateNotPermitted),
        ("[1..2]", OK, PredicateNotPermitted),
        ('"x"', AMOUNT, ConstantKindMismatch),
        ("", AMOUNT, GuardSyntaxError),
        ("< 3 4", AMOUNT, GuardSyntaxError),
    ],
)
def test_bad_unary_tests(test, var, error):
    with pytest.raises(error):
        parse_sfeel(test, var)


def test_assessment_table_compiles_to_three_transitions():
    net, frag = fig4()
    got = {t.id: format_guard(t.guard) for t in frag.transitions}
    assert got == {
        "assessment_decision_r1_skip assessment": 'ok == false && defined(amount) && atype\' == "none"',
        "assessment_decision_r2_simple assessment":
            'ok == true && (amount < 5000 || amount == 5000) && atype\' == "simple"',
        "assessment_decision_r3_advanced assessment": 'ok == true && amount > 5000 && atype\' == "advanced"',
    }
    for t in frag.transitions:
        assert t.writes == {"atype"}
    assert frag.diagnostics == ()
    assert net.decisions == (frozenset(frag.transition_ids),)
    tau = net.transition("assessment_decision_tau")
    assert tau.invisible and tau.guard is None
    assert ("p2", "assessment_decision_tau") in net.arcs
    assert ("assessment_decision_to_simple_assessment", "simple assessment") in net.arcs
    assert ("p2", "simple assessment") not in net.arcs


def test_compiled_fixture_matches_compilation():
    net, _ = fig4()
    stored = load("fig4_compiled")
    assert {t.id: t.guard for t in stored.transitions} == {t.id: t.guard for t in net.transitions}
    assert stored.arcs == net.arcs
    assert stored.decisions == net.decisions


def test_uncovered_output_warns_and_dead_ends():
    net, frag = fig4(drop_branch="skip assessment")
    assert [d.code for d in frag.diagnostics] == ["UncoveredOutput"]
    assert frag.unmatched_place == "assessment_decision_unmatched"
    assert ("assessment_decision_r1_unmatched", "assessment_decision_unmatched") in net.arcs


def test_overlapping_rules():
    tbl = DecisionTable("d", (AMOUNT,), (KIND,), (Rule(("< 10",), ("a",)), Rule(("[5..20]",), ("b",))))
    with pytest.raises(OverlappingRules) as exc:
        check_unique(tbl)
    assert exc.value.rules == (0, 1)
    assert 5 <= exc.value.inputs["amount"] < 10


def test_other_hit_policies_are_rejected():
    with pytest.raises(UnsupportedHitPolicy):
        DecisionTable("d", (AMOUNT,), (KIND,), (), hit_policy="FIRST")


def test_output_kind_is_checked():
    with pytest.raises(ConstantKindMismatch):
        DecisionTable("d", (AMOUNT,), (KIND,), (Rule(("-",), (3,)),))


def test_matching_rule():
    tbl = DecisionTable("d", (AMOUNT,), (KIND,), (Rule(("< 10",), ("a",)), Rule((">= 20",), ("b",))))
    assert matching_rule(tbl, {"amount": 3}) == 0
    assert matching_rule(tbl, {"amount": 25}) == 1
    assert matching_rule(tbl, {"amount": 15}) is None


def test_branch_guard_must_use_outputs():
    tbl = DecisionTable("d", (AMOUNT,), (KIND,), (Rule(("-",), ("a",)),))
    with pytest.raises(DmnError):
        compile_table(tbl, [Branch(parse_guard("amount > 1", [AMOUNT]), "t")])


def _two_tables_host():
    x = TypedVariable("x", INT)
    ts = [Transition("w", parse_guard("x' > 0 || x' == 0 || x' < 0", [x])), Transition("a"), Transition("b"),
          Transition("c"), Transition("d"), Transition("alt1"), Transition("alt2")]
    arcs = [("i", "w"), ("w", "p"), ("p", "a"), ("a", "q"), ("p", "alt1"), ("alt1", "q"),
            ("q", "c"), ("c", "o"), ("q", "alt2"), ("alt2", "o"), ("p", "b"), ("b", "q"), ("q", "d"), ("d", "o")]
    return make_net(["i", "p", "q", "o"], ts, arcs, [x], initial_marking={"i": 1}, final_marking={"o": 1}), x


def test_two_fragments_get_two_internal_transitions():
    host, x = _two_tables_host()
    out1 = TypedVariable("k1", STRING)
    out2 = TypedVariable("k2", STRING)
    t1 = DecisionTable("first", (x,), (out1,), (Rule(("< 0",), ("a",)), Rule((">= 0",), ("b",))))
    t2 = DecisionTable("second", (x,), (out2,), (Rule(("-",), ("c",)),))
    f1 = compile_table(t1, [Branch(parse_guard('k1 == "a"', [out1]), "a"), Branch(parse_guard('k1 == "b"', [out1]), "b")])
    f2 = compile_table(t2, [Branch(parse_guard('k2 == "c"', [out2]), "c"), Branch(parse_guard('k2 == "c"', [out2]), "d")])
    net = embed_fragment(embed_fragment(host, "p", f1), "q", f2)
    taus = sorted(t.id for t in net.transitions if t.invisible)
    assert taus == ["first_tau", "second_tau"]
    assert len(net.decisions) == 2
    # the second table feeds both targets from one rule: two transitions
    assert set(f2.transition_ids) == {"second_r1_c", "second_r1_d"}
    r = check(net)
    assert r.properties["P4"].holds and r.properties["P5"].holds


def test_embedding_errors():
    net, frag = fig4()
    host = load("fig4_host")
    with pytest.raises(UnknownPlace):
        embed_fragment(host, "nowhere", frag)
    with pytest.raises(DmnError):
        embed_fragment(host, "p1", frag)
    with pytest.raises(DmnError):
        embed_fragment(net, "p2", frag)


def test_sibling_count_can_be_overridden():
    host = load("fig4_host")
    _, frag = fig4()
    net = embed_fragment(host.replace(transitions=tuple(t for t in host.transitions if t.id != "withdraw"),
                                      arcs=frozenset(a for a in host.arcs if "withdraw" not in a)),
                         "p2", frag)
    assert not any(t.invisible for t in net.transitions)
    forced = embed_fragment(host, "p2", frag, siblings=0)
    assert "assessment_decision_tau" not in forced.transition_map


def test_compile_dmn_cli_output(tmp_path):
    from dpnsound.cli import main

    out = tmp_path / "net.json"
    code = main(["compile-dmn", str(fixture_path("fig3_table")), "--host", str(fixture_path("fig4_host")),
                 "--place", "p2", "--out", str(out)], out=open(tmp_path / "log", "w"))
    assert code == 0
    assert load_model(out).arcs == fig4()[0].arcs


def test_eager_commitment_differs_from_direct_evaluation():
    # One output feeds two targets with their own, complementary guards.  The
    # compiled net commits to a target before reading those guards, so it can
    # dead-end where evaluating the table in place cannot.
    x = TypedVariable("x", INT)
    kind = TypedVariable("kind", STRING)
    ts = [Transition("collect", parse_guard("x' > 5 || x' == 5 || x' < 5", [x])),
          Transition("high", parse_guard("x > 5", [x])), Transition("low", parse_guard("x < 5 || x == 5", [x]))]
    arcs = [("i", "collect"), ("collect", "at"), ("at", "high"), ("at", "low"), ("high", "o"), ("low", "o")]
    host = make_net(["i", "at", "o"], ts, arcs, [x], initial_marking={"i": 1}, final_marking={"o": 1})
    tbl = DecisionTable("d", (x,), (kind,), (Rule(("-",), ("a",)),))
    same = parse_guard('kind == "a"', [kind])
    case = DecisionCase(host, "at", tbl, (Branch(same, "high"), Branch(same, "low")))
    assert not check(case.compiled()).properties["P1"].holds
    assert direct_report(case).properties["P1"].holds


@pytest.mark.parametrize("seed", range(5))
def test_random_cases_compile(seed):
    case = random_decision_case(seed)
    net = case.compiled()
    assert len(net.decisions) == 1
    for tid in net.decisions[0]:
        assert net.transition(tid).writes == {"kind"}
