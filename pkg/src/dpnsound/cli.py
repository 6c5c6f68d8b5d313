"""Command-line interface: ``dpnsound check|explain|compile-dmn|oracle-compare|translate``."""
from __future__ import annotations

import argparse
import json
import logging
import sys

from . import __version__
from .abstraction import build_representatives
from .cpn import to_json, translate
from .dmn import DmnError, compile_table, embed_fragment
from .guards import GuardError, format_value
from .io import ModelError, color_enabled, load_domains, load_model, load_table, render_report, save_model
from .oracle import DEFAULT_DEPTH, OracleError, TraceExplosion, abstract_traces, compare, concrete_report
from .oracle import concrete_traces
from .soundness import DATA_AWARE, SoundnessError, analyse_graph, check
from .statespace import ExplorationConfig, ExplorationError, explore, graph_to_json

EXIT_OK, EXIT_VIOLATION, EXIT_USAGE, EXIT_BOUND = 0, 1, 2, 3


def _config(args) -> ExplorationConfig:
    return ExplorationConfig(args.max_tokens_per_place, args.max_states, args.parallelism)


def cmd_check(args, out) -> int:
    net = load_model(args.model)
    report = check(net, _config(args), properties=args.properties)
    if args.dump_graph:
        repmap = build_representatives(net)
        graph = explore(translate(net, repmap), _config(args))
        with open(args.dump_graph, "w", encoding="utf-8") as fh:
            json.dump(graph_to_json(graph), fh, indent=1)
    color = args.report == "text" and color_enabled() and out.isatty()
    out.write(render_report(report, args.report, color=color).decode())
    names = DATA_AWARE if args.properties == "data-aware" else None
    return EXIT_OK if report.holds(names) else EXIT_VIOLATION


def cmd_explain(args, out) -> int:
    net = load_model(args.model)
    repmap = build_representatives(net)
    for var in net.variables:
        vr = repmap[var.name]
        consts = ", ".join(format_value(c) for c in vr.constants)
        reps = ", ".join(format_value(r) for r in vr.representatives)
        out.write(f"{var.name}: {var.kind.value}\n")
        out.write(f"  C_{var.name} = {{{consts}}}\n")
        out.write(f"  representatives ({len(vr.representatives)}) = {{{reps}}}\n")
        for iv in vr.intervals:
            shown = "dropped (empty)" if iv.representative is None else format_value(iv.representative)
            out.write(f"    {iv.describe():<24} -> {shown}\n")
    return EXIT_OK


def cmd_compile_dmn(args, out) -> int:
    host = load_model(args.host)
    tbl, branches = load_table(args.table, host.variables)
    frag = compile_table(tbl, branches)
    for d in frag.diagnostics:
        print(f"warning: {d}", file=sys.stderr)
    net = embed_fragment(host, args.place, frag, args.siblings)
    save_model(net, args.out)
    out.write(f"wrote {args.out}: {len(frag.transitions)} decision transitions\n")
    return EXIT_OK


def cmd_oracle_compare(args, out) -> int:
    net = load_model(args.model)
    spec = load_domains(args.domains, net)
    cfg = _config(args)
    repmap = build_representatives(net)
    if not spec.covers_all_intervals(repmap):
        out.write("note: the domains miss some representative interval; disagreement is possible\n")
    g = explore(translate(net, repmap), cfg)
    a = abstract_traces(g, args.depth)
    c = concrete_traces(net, spec, args.depth, cap=args.cap)
    diff = compare(c, a)
    av = analyse_graph(g, repmap=repmap, properties="data-aware").data_aware_sound
    cv = concrete_report(net, spec, cfg, properties="data-aware").data_aware_sound
    out.write(f"traces up to depth {args.depth}: concrete {len(c)}, abstract {len(a)}\n")
    if diff is None:
        out.write("trace sets: equal\n")
    else:
        side = "concrete only" if diff in c else "abstract only"
        out.write(f"trace sets: DIFFER ({side}): <{', '.join(diff)}>\n")
    out.write(f"data-aware sound: abstract {'YES' if av else 'NO'}, concrete {'YES' if cv else 'NO'}\n")
    return EXIT_OK if diff is None and av == cv else EXIT_VIOLATION


def cmd_translate(args, out) -> int:
    net = load_model(args.model)
    cpn = translate(net, build_representatives(net))
    with open(args.out, "w", encoding="utf-8") as fh:
        json.dump(to_json(cpn), fh, indent=2, ensure_ascii=False)
        fh.write("\n")
    out.write(f"wrote {args.out}\n")
    return EXIT_OK


def _bounds(p):
    p.add_argument("--max-tokens-per-place", type=int, default=4, metavar="N")
    p.add_argument("--max-states", type=int, default=1_000_000, metavar="N")
    p.add_argument("--parallelism", type=int, default=1, metavar="N", help=argparse.SUPPRESS)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dpnsound", description="Soundness checking for Data Petri nets.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("check", help="decide the soundness properties of a model")
    p.add_argument("model")
    p.add_argument("--report", choices=["text", "json"], default="text")
    p.add_argument("--properties", choices=["data-aware", "all"], default="all")
    p.add_argument("--dump-graph", metavar="PATH", help="write the reachability graph as JSON (debugging)")
    _bounds(p)
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("explain", help="print constants and representatives per variable")
    p.add_argument("model")
    p.set_defaults(func=cmd_explain)

    p = sub.add_parser("compile-dmn", help="embed a decision table into a host model")
    p.add_argument("table")
    p.add_argument("--host", required=True)
    p.add_argument("--place", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--siblings", type=int, default=None, help="override the sibling count found at the place")
    p.set_defaults(func=cmd_compile_dmn)

    p = sub.add_parser("oracle-compare", help="compare concrete and abstract bounded trace sets")
    p.add_argument("model")
    p.add_argument("--domains", required=True)
    p.add_argument("--depth", type=int, default=DEFAULT_DEPTH)
    p.add_argument("--cap", type=int, default=2_000_000, help="limit on explored (prefix, state) pairs")
    _bounds(p)
    p.set_defaults(func=cmd_oracle_compare)

    p = sub.add_parser("translate", help="write the CPN translation as JSON")
    p.add_argument("model")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_translate)
    return parser


def main(argv=None, out=None) -> int:
    out = out or sys.stdout
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args, out)
    except (ExplorationError, TraceExplosion) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BOUND
    except (ModelError, GuardError, DmnError, OracleError, SoundnessError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
