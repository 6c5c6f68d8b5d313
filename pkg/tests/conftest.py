from pathlib import Path

import pytest

from dpnsound.io import load_model

ROOT = Path(__file__).resolve().parent.parent
FIXTURES = ROOT / "fixtures"

# Hand-built nets exercised by the lattice and faithfulness checks.
HAND_BUILT = [
    "fig1_loan",
    "fig1_loan_sound",
    "fig4_compiled",
    "fig6_simple",
    "linear",
    "unclean_end",
    "double_end",
    "dead_transition",
    "livelock",
    "string_channel",
    "real_threshold",
    "stress",
]


def fixture_path(name: str) -> Path:
    return FIXTURES / f"{name}.json"


def load(name: str):
    return load_model(fixture_path(name))


@pytest.fixture(scope="session")
def fig1():
    return load("fig1_loan")


def fig4(drop_rule=None, drop_branch=None):
    """Compile the assessment table into its host net, optionally mutated."""
    import json

    from dpnsound.dmn import compile_table, embed_fragment, table_from_dict

    host = load("fig4_host")
    doc = json.loads(fixture_path("fig3_table").read_text())
    if drop_rule is not None:
        del doc["rules"][drop_rule]
    if drop_branch is not None:
        doc["branches"] = [b for b in doc["branches"] if b["target"] != drop_branch]
    tbl, branches = table_from_dict(doc, host.variables)
    frag = compile_table(tbl, branches)
    return embed_fragment(host, "p2", frag), frag


def lattice_ok(r) -> bool:
    """The implications between properties and notions hold within ``r``."""
    p, n = {k: v.holds for k, v in r.properties.items()}, r.notions
    return (
        (not p["P1"] or (p["P4"] and p["P5"] and p["P1b"]))
        and (not p["P2"] or p["P2b"])
        and (not n["data-aware"] or (n["decision-aware-weak"] and n["decision-aware-relaxed"] and n["decision-aware-easy"]))
        and (not n["decision-aware-weak"] or n["decision-aware-lazy"])
    )
