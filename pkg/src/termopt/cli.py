"""Command-line entry point: ``termopt <command> [options]``.

Exit status is 0 on success, 1 when a check fails or an input does not
parse, and 2 on usage errors.
"""

from __future__ import annotations

import argparse
import json
import sys
import warnings
from pathlib import Path

from . import samples
from .extractor import extract, stats
from .graph import (
    GraphError,
    IRGraph,
    check_graph_refinement,
    dot_export,
    extract_term,
    graph_eval,
    insert_term,
    load_graph,
    optimize_graph,
    resolve,
    rewrite_at,
    save_graph,
)
from .refine import CheckConfig, check_rule_soundness, format_verdict, verdict_json
from .rules import MayNotDecrease, NonTerminatingPhase, Phase, RewriteLimitExceeded, optimize_term
from .syntax import ParseError, format_expr, parse_expr, parse_rules
from .terms import MethodContext, evaluate
from .values import parse_value


class UsageError(Exception):
    pass


def _widths(text: str) -> frozenset[int]:
    try:
        ws = frozenset(int(w) for w in text.split(",") if w.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated widths, got {text!r}") from None
    if not all(1 <= w <= 64 for w in ws):
        raise argparse.ArgumentTypeError("widths must lie in 1..64")
    return ws


def _read(path: str) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}") from None


def _write(path: str | None, text: str) -> None:
    if path is None:
        sys.stdout.write(text)
    else:
        Path(path).write_text(text, encoding="utf-8")


def _phases(args) -> list[Phase]:
    text = _read(args.rules) if args.rules else samples.shipped_rules_text()
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        phases = parse_rules(text)
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    return phases


def _config(args) -> CheckConfig:
    base = CheckConfig()
    return CheckConfig(
        exhaustive_widths=args.widths if args.widths is not None else base.exhaustive_widths,
        sample_widths=args.sample_widths if args.sample_widths is not None else base.sample_widths,
        samples_per_width=args.samples,
        rng_seed=args.seed,
    )


def _bound_header(cfg: CheckConfig) -> str:
    ex = ",".join(map(str, sorted(cfg.exhaustive_widths))) or "-"
    sa = ",".join(map(str, sorted(cfg.sample_widths))) or "-"
    return (
        f"# bounded check: exhaustive widths {{{ex}}}, {cfg.samples_per_width} samples at widths {{{sa}}},"
        f" seed {cfg.rng_seed}; PASS means verified up to this bound"
    )


def _load_graph(path: str) -> IRGraph:
    return load_graph(_read(path))


def _emit_json(obj) -> None:
    print(json.dumps(obj, indent=2))


# --- commands -------------------------------------------------------------


def cmd_eval(args) -> int:
    params = tuple(parse_value(v) for v in args.params.split(",") if v.strip()) if args.params else ()
    leaves = {}
    for item in args.leaf or []:
        k, _, v = item.partition("=")
        leaves[int(k)] = parse_value(v)
    ctx = MethodContext(params, leaves)
    if args.graph:
        if args.node is None:
            raise UsageError("eval --graph needs --node")
        r = graph_eval(_load_graph(args.graph), args.node, ctx)
    elif args.expr:
        r = evaluate(ctx, parse_expr(args.expr))
    else:
        raise UsageError("eval needs --expr or --graph")
    print(json.dumps({"result": str(r)}) if args.json else r)
    return 0


def cmd_optimize_term(args) -> int:
    if not args.expr:
        raise UsageError("optimize-term needs --expr")
    e = parse_expr(args.expr)
    steps = []
    for ph in _phases(args):
        e = optimize_term(ph, e)
        steps.append({"phase": ph.name, "term": format_expr(e)})
    if args.json:
        _emit_json({"result": format_expr(e), "phases": steps})
    else:
        print(format_expr(e))
    return 0


def cmd_graph_build(args) -> int:
    if not args.expr:
        raise UsageError("graph-build needs --expr")
    g = _load_graph(args.graph) if args.graph else IRGraph.empty()
    g, root = insert_term(g, parse_expr(args.expr))
    _write(args.out, save_graph(g))
    print(f"root {root}", file=sys.stderr)
    return 0


def cmd_graph_optimize(args) -> int:
    if not args.graph:
        raise UsageError("graph-optimize needs --graph")
    g0 = _load_graph(args.graph)
    cfg = _config(args)
    g, changed = g0, []
    for ph in _phases(args):
        if args.node is not None:
            g, did = rewrite_at(g, args.node, ph)
            changed += [args.node] if did else []
        else:
            g, ids = optimize_graph(g, ph)
            changed += ids
    verdict = check_graph_refinement(g0, g, cfg)
    _write(args.out, save_graph(g))
    if args.dot:
        Path(args.dot).write_text(dot_export(g), encoding="utf-8")
    report = format_verdict("graph", verdict).replace("RULE graph", "GRAPH", 1)
    if args.json:
        print(json.dumps({"rewritten": changed, "verdict": verdict_json(verdict)}), file=sys.stderr)
    else:
        print(_bound_header(cfg), file=sys.stderr)
        print(f"rewritten nodes: {changed}", file=sys.stderr)
        print(report, file=sys.stderr)
    return 0 if verdict else 1


def cmd_graph_export(args) -> int:
    if not args.graph:
        raise UsageError("graph-export needs --graph")
    _write(args.out, dot_export(_load_graph(args.graph)))
    return 0


def _termination_line(rule, v) -> str:
    if rule.unchecked:
        return f"TERMINATION {rule.name}: SKIPPED (unchecked)"
    if isinstance(v, MayNotDecrease):
        return f"TERMINATION {rule.name}: FAIL {v}"
    return f"TERMINATION {rule.name}: PASS ({v.cases} cases)"


def cmd_check_termination(args) -> int:
    ok = True
    out = []
    for ph in _phases(args):
        for rule, v in ph.termination:
            bad = isinstance(v, MayNotDecrease) and not rule.unchecked
            ok &= not bad
            if args.json:
                out.append({"phase": ph.name, "rule": rule.name, "status": "FAIL" if bad else "PASS", "detail": str(v)})
            else:
                print(_termination_line(rule, v))
    if args.json:
        _emit_json(out)
    return 0 if ok else 1


def cmd_verify(args) -> int:
    cfg = _config(args)
    ok = True
    out = []
    if not args.json:
        print(_bound_header(cfg))
    for ph in _phases(args):
        for rule, term in ph.termination:
            if isinstance(term, MayNotDecrease) and not rule.unchecked:
                ok = False
                line = f"RULE {rule.name}: FAIL measure may not decrease: {term}"
                entry = {"status": "FAIL", "reason": f"measure may not decrease: {term}"}
            else:
                v = check_rule_soundness(rule, cfg)
                ok &= bool(v)
                line, entry = format_verdict(rule.name, v), verdict_json(v)
            if args.json:
                out.append({"phase": ph.name, "rule": rule.name, **entry})
            else:
                print(line)
    if args.json:
        _emit_json({"bound": _bound_header(cfg)[2:], "results": out})
    return 0 if ok else 1


def cmd_extract(args) -> int:
    paths = []
    for p in args.paths:
        hits = sorted(Path().glob(p)) if any(ch in p for ch in "*?[") else [Path(p)]
        paths.extend(hits)
    text, report = extract(paths, args.phase_name)
    if args.out:
        _write(args.out, text)
    elif not args.json:
        sys.stdout.write(text)
    if args.json:
        _emit_json(report.to_json())
    else:
        sys.stderr.write(stats(report))
        for d in report.duplicate_names:
            print(f"warning: {d}", file=sys.stderr)
        for r in report.parse_failures:
            print(f"error: {r.source_file}:{r.line}: {r.parsed}", file=sys.stderr)
    return 1 if report.parse_failures or report.errors else 0


def cmd_demo(args) -> int:
    out = Path(args.out or "demo_out")
    out.mkdir(parents=True, exist_ok=True)
    arith = next(p for p in samples.shipped_phases() if p.name == "Arithmetic")
    width = 32
    e = samples.subtract_chain_term(width)
    print("== term rewriting")
    print(f"  {'start':<18} {format_expr(e)}")
    for name in ("InverseLeftSub", "RedundantSubtract"):
        e = optimize_term(Phase(name, (arith.rule(name),)), e)
        print(f"  {name:<18} {format_expr(e)}")

    print("== graph rewriting")
    g1 = samples.subtract_chain(width)
    graphs = [("subtract_chain_0", g1)]
    g = g1
    for node, name in ((2, "InverseLeftSub"), (1, "RedundantSubtract")):
        g, _ = rewrite_at(g, node, Phase(name, (arith.rule(name),)))
        graphs.append((f"subtract_chain_{len(graphs)}", g))
    for label, gr in graphs:
        path = out / f"{label}.dot"
        path.write_text(dot_export(gr, label), encoding="utf-8")
        print(f"  {label}: {len(gr)} nodes, root -> node {resolve(gr, 1)}: {format_expr(extract_term(gr, 1))}  [{path}]")
    cfg = CheckConfig(exhaustive_widths={1, 2, 3, 4}, sample_widths=set(), rng_seed=args.seed)
    g4 = samples.subtract_chain(4)
    for node, name in ((2, "InverseLeftSub"), (1, "RedundantSubtract")):
        g4, _ = rewrite_at(g4, node, Phase(name, (arith.rule(name),)))
    v = check_graph_refinement(samples.subtract_chain(4), g4, cfg)
    print("== refinement of the rewritten graph (i4 instance)")
    print("  " + format_verdict("graph", v).replace("RULE graph", "GRAPH", 1))
    return 0 if v else 1


# --- parser ---------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--rules", "--phase", dest="rules", metavar="FILE", help="rule file (default: shipped rules)")
    common.add_argument("--expr", metavar="TEXT", help="ground term, e.g. 'p0:i32 + const i32 1'")
    common.add_argument("--graph", metavar="FILE", help="graph document (JSON)")
    common.add_argument("--node", type=int, metavar="ID", help="graph node id")
    common.add_argument("--out", metavar="PATH", help="output file (or directory for demo)")
    common.add_argument("--widths", type=_widths, metavar="W,..", help="exhaustively checked widths (default 1,2,4)")
    common.add_argument("--sample-widths", type=_widths, metavar="W,..", help="sampled widths (default 8,32,64)")
    common.add_argument("--samples", type=int, default=CheckConfig.samples_per_width, metavar="N")
    common.add_argument("--seed", type=int, default=CheckConfig.rng_seed, metavar="N")
    common.add_argument("--json", action="store_true", help="machine-readable output")

    ap = argparse.ArgumentParser(prog="termopt", description="Verified-at-bound term and graph rewriting.")
    sub = ap.add_subparsers(dest="command", required=True, metavar="command")
    cmds = {
        "eval": (cmd_eval, "evaluate a term or graph node in a context"),
        "optimize-term": (cmd_optimize_term, "rewrite a term to normal form"),
        "graph-build": (cmd_graph_build, "insert a term into a graph with maximal sharing"),
        "graph-optimize": (cmd_graph_optimize, "rewrite graph nodes and check the result refines the input"),
        "graph-export": (cmd_graph_export, "render a graph as Graphviz DOT"),
        "verify": (cmd_verify, "check termination and bounded soundness of every rule"),
        "check-termination": (cmd_check_termination, "check that every rule decreases its phase measure"),
        "extract": (cmd_extract, "harvest veriopt comments from source files"),
        "demo": (cmd_demo, "walk through the subtraction example on terms and graphs"),
    }
    for name, (fn, help_) in cmds.items():
        p = sub.add_parser(name, parents=[common], help=help_, description=help_)
        p.set_defaults(func=fn)
        match name:
            case "eval":
                p.add_argument("--params", metavar="V,..", help="parameter values, e.g. 'i8 3,i8 -1'")
                p.add_argument("--leaf", action="append", metavar="ID=V", help="leaf value, e.g. '7=i32 5'")
            case "graph-optimize":
                p.add_argument("--dot", metavar="FILE", help="also write the result as DOT")
            case "extract":
                p.add_argument("paths", nargs="*", help="source files or glob patterns")
                p.add_argument("--phase-name", metavar="NAME", help="put all rules in one phase")
    return ap


def main(argv: list[str] | None = None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        ap.error(str(exc))
    except ParseError as exc:
        print(f"parse error: {exc}", file=sys.stderr)
    except (GraphError, NonTerminatingPhase, RewriteLimitExceeded, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
    return 1


if __name__ == "__main__":
    sys.exit(main())
