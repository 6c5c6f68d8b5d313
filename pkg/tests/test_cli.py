import io
import json
import subprocess
import sys

import pytest

from dpnsound.cli import main
from dpnsound.io import load_model

from conftest import fixture_path


def run(*argv):
    buf = io.StringIO()
    code = main([str(a) for a in argv], out=buf)
    return code, buf.getvalue()


def test_check_unsound_model():
    code, text = run("check", fixture_path("fig1_loan"))
    assert code == 1
    assert "DEADLOCK: {p5:1, p6:1}" in text


def test_check_sound_model():
    code, text = run("check", fixture_path("fig1_loan_sound"))
    assert code == 0
    assert "data-aware sound: YES" in text


def test_data_aware_suite_ignores_lazy_properties():
    # double_end also breaks P2b; the narrower suite still fails on P1 and P2
    code, _ = run("check", fixture_path("double_end"), "--properties", "data-aware")
    assert code == 1
    code, text = run("check", fixture_path("fig1_loan_sound"), "--properties", "data-aware", "--report", "json")
    assert code == 0
    assert set(json.loads(text)["properties"]) == {"P1", "P2", "P3"}


def test_json_report_and_graph_dump(tmp_path):
    dump = tmp_path / "graph.json"
    code, text = run("check", fixture_path("fig1_loan"), "--report", "json", "--dump-graph", dump)
    assert code == 1
    doc = json.loads(text)
    assert doc["tool"] == "dpnsound" and doc["notions"]["data-aware"] is False
    assert len(json.loads(dump.read_text())["nodes"]) == doc["stats"]["nodes"]


def test_bounds_exceeded_exit_code():
    assert run("check", fixture_path("fig1_loan"), "--max-states", 5)[0] == 3


def test_usage_errors(tmp_path):
    assert run()[0] == 2
    assert run("check")[0] == 2
    assert run("check", tmp_path / "missing.json")[0] == 2
    bad = tmp_path / "bad.json"
    bad.write_text('{"places": []}')
    assert run("check", bad)[0] == 2
    assert run("--version")[0] == 0


def test_explain():
    code, text = run("explain", fixture_path("fig1_loan"))
    assert code == 0
    assert "C_amount = {5000, 10000, 15000}" in text
    assert "representatives (7) = {4999, 5000, 5001, 10000, 10001, 15000, 15001}" in text


def test_compile_dmn(tmp_path):
    out = tmp_path / "compiled.json"
    code, text = run("compile-dmn", fixture_path("fig3_table"), "--host", fixture_path("fig4_host"),
                     "--place", "p2", "--out", out)
    assert code == 0 and "3 decision transitions" in text
    assert load_model(out).decisions == load_model(fixture_path("fig4_compiled")).decisions
    assert run("compile-dmn", fixture_path("fig3_table"), "--host", fixture_path("fig4_host"),
               "--place", "nowhere", "--out", out)[0] == 2


def test_oracle_compare(tmp_path):
    domains = tmp_path / "domains.json"
    domains.write_text(json.dumps({"amount": {"range": [0, 20000], "step": 500}}))
    code, text = run("oracle-compare", fixture_path("fig1_loan"), "--domains", domains, "--depth", 6)
    assert code == 0
    assert "trace sets: equal" in text
    assert "data-aware sound: abstract NO, concrete NO" in text

    domains.write_text(json.dumps({"amount": [5000, 10000, 15000]}))
    code, text = run("oracle-compare", fixture_path("fig1_loan"), "--domains", domains, "--depth", 6)
    assert code == 1
    assert "note: the domains miss" in text and "DIFFER" in text

    assert run("oracle-compare", fixture_path("fig1_loan"), "--domains", domains, "--cap", 3)[0] == 3


def test_translate(tmp_path):
    out = tmp_path / "cpn.json"
    code, _ = run("translate", fixture_path("fig6_simple"), "--out", out)
    assert code == 0
    doc = json.loads(out.read_text())
    assert {p["id"] for p in doc["places"]} == {"i", "p", "o", "var_x", "rep_x"}


def test_color_env(monkeypatch):
    monkeypatch.setenv("DPNSOUND_COLOR", "0")
    from dpnsound.io import color_enabled

    assert not color_enabled()
    monkeypatch.setenv("DPNSOUND_COLOR", "1")
    assert color_enabled()


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "dpnsound", "check", str(fixture_path("linear"))],
                          capture_output=True, text=True, env={"DPNSOUND_COLOR": "0", "PATH": ""})
    assert proc.returncode == 0
    assert "\x1b[" not in proc.stdout
