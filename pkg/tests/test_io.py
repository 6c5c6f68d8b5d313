import json

import pytest

from dpnsound.io import (
    SCHEMAS,
    InvalidModel,
    ModelError,
    UnsupportedType,
    load_model,
    model_from_dict,
    model_to_dict,
    render_report,
    report_from_dict,
    report_to_dict,
    save_model,
)
from dpnsound.soundness import check

from conftest import FIXTURES, HAND_BUILT, ROOT, fixture_path, load

GOLDEN = FIXTURES / "golden"


def minimal(**extra):
    doc = {
        "version": 1,
        "variables": [{"name": "x", "type": "int", "initial": None}],
        "places": ["i", "o"],
        "transitions": [{"id": "t", "guard": "x' > 3"}],
        "arcs": [["i", "t"], ["t", "o"]],
        "initial_marking": {"i": 1},
        "final_marking": {"o": 1},
    }
    doc.update(extra)
    return doc


def test_loan_fixture_loads(fig1):
    assert fig1.name == "fig1_loan"
    assert len(fig1.transitions) == 12 and len(fig1.variables) == 2
    assert fig1.transition("verify").writes == {"ok"}


def test_unsupported_type():
    doc = minimal(variables=[{"name": "due", "type": "date", "initial": None}])
    with pytest.raises(UnsupportedType) as exc:
        model_from_dict(doc)
    assert exc.value.pointer == "/variables/0/type"


@pytest.mark.parametrize(
    "change,pointer",
    [
        ({"places": "i"}, "/places"),
        ({"arcs": [["i", "t", 2], ["t", "o"]]}, "/arcs/0"),
        ({"transitions": [{"id": "t", "guard": "x' >"}]}, "/transitions/0/guard"),
        ({"variables": [{"name": "x", "type": "int", "initial": "five"}]}, "/variables/0/initial"),
        ({"colour": "red"}, ""),
    ],
)
def test_errors_carry_a_pointer(change, pointer):
    with pytest.raises(ModelError) as exc:
        model_from_dict(minimal(**change))
    assert exc.value.pointer == pointer


def test_lenient_mode_accepts_extra_fields():
    assert model_from_dict(minimal(colour="red"), strict=False).places == ("i", "o")


def test_duplicate_arc_rejected():
    with pytest.raises(ModelError):
        model_from_dict(minimal(arcs=[["i", "t"], ["i", "t"], ["t", "o"]]))


def test_validation_failures_are_reported():
    with pytest.raises(InvalidModel) as exc:
        model_from_dict(minimal(transitions=[{"id": "t", "guard": "x' > 3", "writes": []}]))
    assert [d.code for d in exc.value.diagnostics] == ["WriteNotDeclared"]


def test_final_marking_defaults_to_the_sink():
    doc = minimal()
    del doc["final_marking"]
    assert model_from_dict(doc).final_marking.as_dict() == {"o": 1}
    doc["places"].append("z")
    with pytest.raises(ModelError):
        model_from_dict(doc)


def test_bad_json(tmp_path):
    p = tmp_path / "broken.json"
    p.write_text("{")
    with pytest.raises(ModelError):
        load_model(p)


@pytest.mark.parametrize("name", HAND_BUILT + ["fig4_host"])
def test_save_load_round_trip(name, tmp_path):
    net = load(name)
    save_model(net, tmp_path / "copy.json")
    again = load_model(tmp_path / "copy.json")
    assert model_to_dict(again) == model_to_dict(net)
    assert again.transitions == net.transitions and again.arcs == net.arcs


def test_report_json_round_trip():
    for name in ["fig1_loan", "livelock", "unclean_end"]:
        r = check(load(name))
        doc = json.loads(render_report(r, "json"))
        back = report_from_dict(doc)
        assert report_to_dict(back) == doc


def test_published_schemas_match():
    for name, schema in SCHEMAS.items():
        assert json.loads((ROOT / "docs" / name).read_text()) == schema


def _stable(doc):
    doc = dict(doc)
    doc["stats"] = {k: v for k, v in doc["stats"].items() if k != "seconds"}
    return doc


@pytest.mark.parametrize("name", ["fig1_loan", "fig4_compiled", "unclean_end"])
def test_golden_reports(name):
    doc = _stable(json.loads(render_report(check(load(name)), "json")))
    golden = json.loads((GOLDEN / f"{name}.report.json").read_text())
    assert doc == golden


def test_text_report_of_the_loan(fig1):
    text = render_report(check(fig1), "text").decode()
    assert "data-aware sound: NO" in text
    assert "DEADLOCK: {p5:1, p6:1}" in text
    assert "verify  ok'=false" in text
    assert "dead transitions: none" in text
    assert "(any value in" in text


def test_text_report_of_a_sound_net():
    text = render_report(check(load("fig1_loan_sound")), "text").decode()
    assert "data-aware sound: YES" in text
    assert "DEADLOCK" not in text and "LIVELOCK" not in text and "VIOLATION" not in text


def test_color_codes_only_when_asked(fig1):
    r = check(fig1)
    assert b"\x1b[" not in render_report(r, "text")
    assert b"\x1b[31m" in render_report(r, "text", color=True)
    with pytest.raises(ValueError):
        render_report(r, "xml")
