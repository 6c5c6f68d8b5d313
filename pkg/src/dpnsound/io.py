"""JSON model documents, report documents and the text report renderer."""
from __future__ import annotations

import json
import os
from fractions import Fraction
from pathlib import Path

import jsonschema

from . import __version__
from .dmn import table_from_dict
from .dpn import DPN, Assignment, Marking, Transition, validate
from .guards import (
    DOMAINS,
    UNDEFINED,
    GuardError,
    Kind,
    TypedVariable,
    coerce_value,
    format_guard,
    format_real,
    format_value,
    guard_occurrences,
    parse_optional_guard,
)
from .oracle import spec_from_dict
from .soundness import Finding, SoundnessReport, Verdict, WitnessStep

SCHEMA_VERSION = 1

_IDENT = "^[A-Za-z_][A-Za-z0-9_.]*$"
_COUNTS = {"type": "object", "additionalProperties": {"type": "integer", "minimum": 0}}

MODEL_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "dpnsound model document",
    "type": "object",
    "required": ["version", "places", "transitions", "arcs", "initial_marking"],
    "additionalProperties": False,
    "properties": {
        "version": {"const": SCHEMA_VERSION},
        "name": {"type": "string"},
        "variables": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["name", "type"],
                "additionalProperties": False,
                "properties": {
                    "name": {"type": "string", "pattern": _IDENT},
                    "type": {"type": "string"},
                    "initial": {"type": ["integer", "number", "boolean", "string", "null"]},
                },
            },
        },
        "places": {"type": "array", "items": {"type": "string"}, "uniqueItems": True},
        "transitions": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["id"],
                "additionalProperties": False,
                "properties": {
                    "id": {"type": "string"},
                    "label": {"type": ["string", "null"]},
                    "guard": {"type": ["string", "null"]},
                    "reads": {"type": "array", "items": {"type": "string"}, "uniqueItems": True},
                    "writes": {"type": "array", "items": {"type": "string"}, "uniqueItems": True},
                    "invisible": {"type": "boolean"},
                },
            },
        },
        "arcs": {"type": "array", "items": {"type": "array", "items": {"type": "string"}}},
        "initial_marking": _COUNTS,
        "final_marking": _COUNTS,
        "decisions": {
            "type": "array",
            "items": {"type": "array", "items": {"type": "string"}, "minItems": 1},
        },
    },
}

_VALUE = {"type": ["integer", "number", "boolean", "string", "null"]}
_STEP = {
    "type": "object",
    "required": ["transition", "writes"],
    "additionalProperties": False,
    "properties": {
        "transition": {"type": "string"},
        "writes": {"type": "array", "items": {"type": "array", "prefixItems": [{"type": "string"}, _VALUE]}},
        "classes": {"type": "object", "additionalProperties": {"type": "string"}},
    },
}
_FINDING = {
    "type": "object",
    "required": ["marking", "witness"],
    "additionalProperties": False,
    "properties": {
        "marking": _COUNTS,
        "witness": {"type": "array", "items": _STEP},
        "cycle": {"type": "array", "items": _STEP},
        "decision": {"type": "array", "items": {"type": "string"}},
    },
}

REPORT_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "dpnsound soundness report",
    "type": "object",
    "required": ["tool", "version", "model", "properties", "notions", "dead_transitions", "deadlocks"],
    "additionalProperties": False,
    "properties": {
        "tool": {"const": "dpnsound"},
        "version": {"type": "string"},
        "model": {"type": "string"},
        "properties": {
            "type": "object",
            "additionalProperties": {
                "type": "object",
                "required": ["holds"],
                "additionalProperties": False,
                "properties": {
                    "holds": {"type": "boolean"},
                    "vacuous": {"type": "boolean"},
                    "evidence": {"type": "array"},
                },
            },
        },
        "notions": {"type": "object", "additionalProperties": {"type": "boolean"}},
        "dead_transitions": {"type": "array", "items": {"type": "string"}},
        "invisible_transitions": {"type": "array", "items": {"type": "string"}},
        "deadlocks": {"type": "array", "items": _FINDING},
        "livelocks": {"type": "array", "items": _FINDING},
        "improper_completions": {"type": "array", "items": _FINDING},
        "stats": {"type": "object"},
    },
}


TABLE_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "dpnsound decision table document",
    "type": "object",
    "required": ["name", "inputs", "outputs", "rules"],
    "additionalProperties": False,
    "properties": {
        "name": {"type": "string", "pattern": _IDENT},
        "hit_policy": {"type": "string"},
        "inputs": {"type": "array", "items": {"type": "string"}},
        "outputs": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "required": ["name", "type"],
                "additionalProperties": False,
                "properties": {"name": {"type": "string", "pattern": _IDENT}, "type": {"type": "string"}},
            },
        },
        "rules": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "required": ["inputs", "outputs"],
                "additionalProperties": False,
                "properties": {
                    "inputs": {"type": "array", "items": {"type": "string"}},
                    "outputs": {"type": "array", "items": {"type": ["string", "integer", "number", "boolean"]}},
                },
            },
        },
        "branches": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["guard", "target"],
                "additionalProperties": False,
                "properties": {"guard": {"type": "string"}, "target": {"type": "string"}},
            },
        },
    },
}

DOMAINS_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "dpnsound finite domain specification",
    "type": "object",
    "additionalProperties": {
        "oneOf": [
            {"type": "array", "items": {"type": ["integer", "number", "boolean", "string"]}},
            {
                "type": "object",
                "required": ["range"],
                "additionalProperties": False,
                "properties": {
                    "range": {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2},
                    "step": {"type": "number", "exclusiveMinimum": 0},
                },
            },
        ]
    },
}


class ModelError(ValueError):
    def __init__(self, message: str, pointer: str = ""):
        super().__init__(f"{pointer}: {message}" if pointer else message)
        self.pointer = pointer


class UnsupportedType(ModelError):
    pass


class InvalidModel(ModelError):
    def __init__(self, diagnostics):
        super().__init__("; ".join(str(d) for d in diagnostics))
        self.diagnostics = list(diagnostics)


def _pointer(path) -> str:
    return "/" + "/".join(str(p).replace("~", "~0").replace("/", "~1") for p in path) if path else ""


def _lenient(schema: dict) -> dict:
    out = dict(schema)
    out["additionalProperties"] = True
    return out


def read_json(path) -> object:
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise ModelError(f"invalid JSON: {exc.msg} (line {exc.lineno}, column {exc.colno})") from None


def _validate_doc(doc, schema):
    errors = sorted(jsonschema.Draft202012Validator(schema).iter_errors(doc), key=lambda e: list(e.absolute_path))
    if errors:
        raise ModelError(errors[0].message, _pointer(errors[0].absolute_path))


def load_table(path, variables) -> tuple:
    """``(DecisionTable, branches)`` from a table document."""
    doc = read_json(path)
    _validate_doc(doc, TABLE_SCHEMA)
    return table_from_dict(doc, variables)


def load_domains(path, net: DPN):
    doc = read_json(path)
    _validate_doc(doc, DOMAINS_SCHEMA)
    return spec_from_dict(doc, net)


def load_model(path, strict: bool = True) -> DPN:
    doc = read_json(path)
    name = Path(path).stem
    return model_from_dict(doc, strict=strict, default_name=name)


def model_from_dict(doc, strict: bool = True, default_name: str = "net") -> DPN:
    schema = MODEL_SCHEMA if strict else _lenient(MODEL_SCHEMA)
    # Named errors first, so they are not masked by generic schema messages.
    if isinstance(doc, dict):
        for i, var in enumerate(doc.get("variables") or []):
            if isinstance(var, dict) and isinstance(var.get("type"), str) and var["type"] not in {
                k.value for k in Kind
            }:
                raise UnsupportedType(f"unsupported variable type {var['type']!r}", f"/variables/{i}/type")
        for i, arc in enumerate(doc.get("arcs") or []):
            if isinstance(arc, list) and len(arc) != 2:
                raise ModelError("weighted or malformed arc; arcs are [source, target] pairs", f"/arcs/{i}")
    _validate_doc(doc, schema)

    variables = []
    initial = {}
    for i, raw in enumerate(doc.get("variables", [])):
        var = TypedVariable(raw["name"], DOMAINS[Kind(raw["type"])])
        variables.append(var)
        try:
            initial[var.name] = coerce_value(var.kind, raw.get("initial"))
        except ValueError as exc:
            raise ModelError(str(exc), f"/variables/{i}/initial") from None
    transitions = []
    for i, raw in enumerate(doc["transitions"]):
        try:
            guard = parse_optional_guard(raw.get("guard"), variables)
        except GuardError as exc:
            raise ModelError(str(exc), f"/transitions/{i}/guard") from None
        reads, writes = guard_occurrences(guard)
        if "reads" in raw:
            reads = set(raw["reads"])
        if "writes" in raw:
            writes = set(raw["writes"])
        transitions.append(
            Transition(
                raw["id"],
                guard,
                frozenset(reads),
                frozenset(writes),
                raw.get("label"),
                raw.get("invisible", False),
            )
        )
    arcs = [tuple(a) for a in doc["arcs"]]
    if len(set(arcs)) != len(arcs):
        raise ModelError("duplicate arc", "/arcs")
    final = doc.get("final_marking")
    if final is None:
        sources = {s for s, _ in arcs}
        sinks = [p for p in doc["places"] if p not in sources]
        if len(sinks) != 1:
            raise ModelError(f"final_marking omitted and the net has {len(sinks)} sink places", "/final_marking")
        final = {sinks[0]: 1}
    net = DPN(
        places=tuple(doc["places"]),
        transitions=tuple(transitions),
        arcs=frozenset(arcs),
        variables=tuple(variables),
        initial_assignment=Assignment(initial),
        initial_marking=Marking(doc["initial_marking"]),
        final_marking=Marking(final),
        decisions=tuple(frozenset(d) for d in doc.get("decisions", [])),
        name=doc.get("name", default_name),
    )
    problems = validate(net)
    if problems:
        raise InvalidModel(problems)
    return net


def value_to_json(value):
    if value is UNDEFINED:
        return None
    if isinstance(value, Fraction):
        return format_real(value)
    return value


def model_to_dict(net: DPN) -> dict:
    doc = {"version": SCHEMA_VERSION, "name": net.name}
    doc["variables"] = [
        {
            "name": v.name,
            "type": v.kind.value,
            "initial": value_to_json(net.initial_assignment.get(v.name, UNDEFINED)),
        }
        for v in net.variables
    ]
    doc["places"] = list(net.places)
    transitions = []
    for t in net.transitions:
        entry = {"id": t.id}
        if t.label is not None:
            entry["label"] = t.label
        entry["guard"] = None if t.guard is None else format_guard(t.guard)
        entry["reads"] = sorted(t.reads)
        entry["writes"] = sorted(t.writes)
        if t.invisible:
            entry["invisible"] = True
        transitions.append(entry)
    doc["transitions"] = transitions
    doc["arcs"] = [list(a) for a in sorted(net.arcs)]
    doc["initial_marking"] = net.initial_marking.as_dict()
    doc["final_marking"] = net.final_marking.as_dict()
    if net.decisions:
        doc["decisions"] = [sorted(d) for d in net.decisions]
    return doc


def save_model(net: DPN, path) -> None:
    Path(path).write_text(json.dumps(model_to_dict(net), indent=2, ensure_ascii=False) + "\n", encoding="utf-8")


# --------------------------------------------------------------------------
# Reports


def _step_to_dict(step: WitnessStep) -> dict:
    out = {"transition": step.transition, "writes": [[v, value_to_json(x)] for v, x in step.writes]}
    if step.classes:
        out["classes"] = dict(step.classes)
    return out


def _finding_to_dict(f: Finding) -> dict:
    out = {"marking": f.marking.as_dict(), "witness": [_step_to_dict(s) for s in f.witness]}
    if f.cycle:
        out["cycle"] = [_step_to_dict(s) for s in f.cycle]
    if f.decision:
        out["decision"] = list(f.decision)
    return out


def _evidence_to_json(item):
    if isinstance(item, Finding):
        return _finding_to_dict(item)
    return item


def report_to_dict(r: SoundnessReport) -> dict:
    return {
        "tool": "dpnsound",
        "version": __version__,
        "model": r.model,
        "properties": {
            name: {"holds": v.holds, "vacuous": v.vacuous, "evidence": [_evidence_to_json(e) for e in v.evidence]}
            for name, v in r.properties.items()
        },
        "notions": dict(r.notions),
        "dead_transitions": list(r.dead_transitions),
        "invisible_transitions": sorted(r.invisible),
        "deadlocks": [_finding_to_dict(f) for f in r.deadlocks],
        "livelocks": [_finding_to_dict(f) for f in r.livelocks],
        "improper_completions": [_finding_to_dict(f) for f in r.improper_completions],
        "stats": dict(r.stats),
    }


def _step_from_dict(d) -> WitnessStep:
    return WitnessStep(
        d["transition"],
        tuple((v, UNDEFINED if x is None else x) for v, x in d["writes"]),
        tuple(d.get("classes", {}).items()),
    )


def _finding_from_dict(d) -> Finding:
    return Finding(
        Marking(d["marking"]),
        tuple(_step_from_dict(s) for s in d["witness"]),
        tuple(_step_from_dict(s) for s in d.get("cycle", [])),
        tuple(d.get("decision", [])),
    )


def _evidence_from_json(item):
    if isinstance(item, dict):
        return _finding_from_dict(item)
    return item


def report_from_dict(doc) -> SoundnessReport:
    jsonschema.validate(doc, REPORT_SCHEMA)
    return SoundnessReport(
        model=doc["model"],
        properties={
            name: Verdict(v["holds"], v.get("vacuous", False), tuple(_evidence_from_json(e) for e in v.get("evidence", [])))
            for name, v in doc["properties"].items()
        },
        notions=dict(doc["notions"]),
        dead_transitions=tuple(doc["dead_transitions"]),
        deadlocks=tuple(_finding_from_dict(f) for f in doc["deadlocks"]),
        livelocks=tuple(_finding_from_dict(f) for f in doc.get("livelocks", [])),
        improper_completions=tuple(_finding_from_dict(f) for f in doc.get("improper_completions", [])),
        stats=dict(doc.get("stats", {})),
        invisible=frozenset(doc.get("invisible_transitions", [])),
    )


def _json_default(obj):
    if isinstance(obj, Fraction):
        return format_real(obj)
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def color_enabled() -> bool:
    return os.environ.get("DPNSOUND_COLOR", "1") != "0"


def _paint(text: str, code: str, color: bool) -> str:
    return f"\x1b[{code}m{text}\x1b[0m" if color else text


_PROPERTY_TITLES = {
    "P1": "option to complete",
    "P2": "proper completion",
    "P3": "no dead transitions",
    "P4": "conditional completeness",
    "P5": "conditional output coverage",
    "P2b": "at most one token in the output place",
    "P1b": "some run completes",
}


def _render_step(i: int, step: WitnessStep) -> str:
    classes = dict(step.classes)
    parts = []
    for v, x in step.writes:
        text = f"{v}'={format_value(x)}"
        if v in classes:
            text += f" ({classes[v]})"
        parts.append(text)
    suffix = ("  " + ", ".join(parts)) if parts else ""
    return f"    {i}. {step.transition}{suffix}"


def _render_finding(title: str, f: Finding, lines: list, color: bool):
    lines.append(_paint(f"{title}: {f.marking}", "31", color))
    if f.decision:
        lines.append(f"  decision: {{{', '.join(f.decision)}}}")
    if f.witness:
        lines.append("  witness:")
        lines.extend(_render_step(i, s) for i, s in enumerate(f.witness, 1))
    else:
        lines.append("  witness: (initial marking)")
    if f.cycle:
        lines.append("  cycle:")
        lines.extend(_render_step(i, s) for i, s in enumerate(f.cycle, 1))


def render_text(r: SoundnessReport, color: bool = False) -> str:
    lines = [f"model: {r.model}"]
    for name, holds in r.notions.items():
        word = _paint("YES", "32", color) if holds else _paint("NO", "31", color)
        lines.append(f"{name} sound: {word}")
    lines.append("")
    for name, v in r.properties.items():
        status = "holds" if v.holds else "VIOLATED"
        if v.vacuous:
            status += " (vacuous: no decisions declared)"
        lines.append(f"{name:<4} {_PROPERTY_TITLES.get(name, name)}: {status}")
    lines.append("")
    if r.dead_transitions:
        lines.append("dead transitions:")
        for t in r.dead_transitions:
            tag = " (internal)" if t in r.invisible else ""
            lines.append(f"  - {t}{tag}")
    else:
        lines.append("dead transitions: none")
    for f in r.deadlocks:
        _render_finding("DEADLOCK", f, lines, color)
    for f in r.livelocks:
        _render_finding("LIVELOCK", f, lines, color)
    for f in r.improper_completions:
        _render_finding("IMPROPER COMPLETION", f, lines, color)
    for name in ("P4", "P5", "P2b"):
        v = r.properties.get(name)
        if v is not None and not v.holds:
            for f in v.evidence:
                _render_finding(f"{name} VIOLATION", f, lines, color)
    stats = r.stats
    if stats:
        shown = ", ".join(f"{k}={v}" for k, v in stats.items())
        lines.append(f"stats: {shown}")
    return "\n".join(lines) + "\n"


def render_report(r: SoundnessReport, fmt: str = "text", color: bool = False) -> bytes:
    if fmt == "json":
        return (json.dumps(report_to_dict(r), indent=2, default=_json_default, ensure_ascii=False) + "\n").encode()
    if fmt == "text":
        return render_text(r, color).encode()
    raise ValueError(f"unknown report format {fmt!r}")


SCHEMAS = {
    "model.schema.json": MODEL_SCHEMA,
    "report.schema.json": REPORT_SCHEMA,
    "table.schema.json": TABLE_SCHEMA,
    "domains.schema.json": DOMAINS_SCHEMA,
}


def write_schemas(directory) -> None:
    """Write the published JSON schemas into ``directory``."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for name, schema in SCHEMAS.items():
        (directory / name).write_text(json.dumps(schema, indent=2) + "\n", encoding="utf-8")
