import json
from pathlib import Path

import pytest

from termopt.cli import main
from termopt.graph import RefNode, load_graph, resolve
from termopt.samples import data_text

FIXTURE = Path(__file__).parent / "fixtures" / "ConditionalNode.java"
CONDITIONAL = """phase Conditional {
  NegateCond: ((!c) ? t : f) |-> (c ? f : t);
  TrueCond: (true ? t : f) |-> t;
  FalseCond: (false ? t : f) |-> f;
  BranchEqual: (c ? x : x) |-> x;
  LessCond: ((u < v) ? t : f) |-> t when StampUnder(u, v);
}
"""
SUB = "phase Sub { InverseLeftSub: (x - y) + y |-> x; RedundantSubtract: x - (x - y) |-> y; }\n"
CHAIN = "((p0:i32 - p1:i32) + p1:i32) - (p0:i32 - p1:i32)"


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def write(tmp_path, name, text):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_verify_conditional_rules(tmp_path, capsys):
    code, out, _ = run(capsys, "verify", "--rules", write(tmp_path, "conditional.rules", CONDITIONAL))
    assert code == 0
    lines = out.splitlines()
    assert lines[0].startswith("# bounded check:")
    assert sum(ln.startswith("RULE ") and ": PASS" in ln for ln in lines) == 5


def test_verify_shipped_rules(capsys):
    code, out, _ = run(capsys, "verify", "--samples", "64")
    assert code == 0
    assert sum(ln.startswith("RULE ") and ": PASS" in ln for ln in out.splitlines()) == 9


def test_verify_reports_a_counterexample(tmp_path, capsys):
    code, out, _ = run(capsys, "verify", "--rules", write(tmp_path, "bad.rules", "phase P { Swap: x - y |-> y - x; }"))
    assert code == 1 and "RULE Swap: FAIL" in out


def test_verify_json(capsys):
    code, out, _ = run(capsys, "verify", "--json", "--samples", "16")
    data = json.loads(out)
    assert code == 0 and len(data["results"]) == 9
    assert {r["status"] for r in data["results"]} == {"PASS"}


def test_check_termination(tmp_path, capsys):
    code, out, _ = run(capsys, "check-termination", "--rules", write(tmp_path, "c.rules", "phase P { C: x + y |-> y + x; }"))
    assert code == 1 and out.startswith("TERMINATION C: FAIL")
    code, out, _ = run(capsys, "check-termination")
    assert code == 0 and out.count(": PASS") == 9


def test_unchecked_rules_are_skipped(tmp_path, capsys):
    rules = write(tmp_path, "u.rules", "phase P { unchecked C: x + y |-> y + x; }")
    code, out, _ = run(capsys, "check-termination", "--rules", rules)
    assert code == 0 and "SKIPPED" in out


def test_optimize_term(tmp_path, capsys):
    code, out, _ = run(capsys, "optimize-term", "--phase", write(tmp_path, "sub.rules", SUB), "--expr", CHAIN)
    assert code == 0 and out == "p1:i32\n"


def test_optimize_term_json(capsys):
    code, out, _ = run(capsys, "optimize-term", "--json", "--expr", "(const i8 1 + p0:i8) - const i8 0")
    data = json.loads(out)
    assert code == 0 and data["result"] == "(p0:i8 + const i8 1) - const i8 0"


def test_eval(capsys):
    code, out, _ = run(capsys, "eval", "--expr", "p0:i8 * const i8 3", "--params", "i8 100")
    assert code == 0 and out.strip() == "i8 44"
    code, out, _ = run(capsys, "eval", "--expr", "leaf 3:i4 + const i4 1", "--leaf", "3=i4 2")
    assert out.strip() == "i4 3"


def test_graph_build_and_export(tmp_path, capsys):
    g = tmp_path / "g.json"
    code, _, err = run(capsys, "graph-build", "--expr", "(p0:i32 * p0:i32) + (p0:i32 * p0:i32)", "--out", g)
    assert code == 0 and err.strip() == "root 2"
    assert len(load_graph(g.read_text())) == 3
    code, _, _ = run(capsys, "graph-build", "--graph", g, "--expr", "p0:i32 * p0:i32", "--out", g)
    assert len(load_graph(g.read_text())) == 3
    code, out, _ = run(capsys, "graph-export", "--graph", g)
    assert code == 0 and out.startswith("digraph")


def test_graph_optimize(tmp_path, capsys):
    src = write(tmp_path, "chain.json", data_text("subtract_chain.json"))
    out_path, dot = tmp_path / "out.json", tmp_path / "out.dot"
    code, _, err = run(capsys, "graph-optimize", "--graph", src, "--out", out_path, "--dot", dot, "--widths", "1,2,3")
    assert code == 0
    assert "GRAPH: PASS" in err and "verified up to this bound" in err
    g = load_graph(out_path.read_text())
    assert resolve(g, 1) == 5
    assert isinstance(g.kind(1), RefNode) and isinstance(g.kind(2), RefNode)
    assert "dashed" in dot.read_text()


def test_graph_optimize_single_node(tmp_path, capsys):
    src = write(tmp_path, "chain.json", data_text("subtract_chain.json"))
    code, out, err = run(capsys, "graph-optimize", "--graph", src, "--node", 2, "--widths", "2")
    assert code == 0 and "rewritten nodes: [2]" in err
    assert load_graph(out).kind(2) == RefNode(4)


def test_extract(tmp_path, capsys):
    out_path = tmp_path / "cond.rules"
    code, _, err = run(capsys, "extract", FIXTURE, "--out", out_path)
    assert code == 0
    assert "1 file, 4 comments, 4 parsed, 0 failures, 1 duplicate name" in err
    assert "warning:" in err
    code, out, _ = run(capsys, "verify", "--rules", out_path, "--samples", "16")
    assert code == 0 and out.count(": PASS") == 4


def test_extract_glob_and_failures(tmp_path, capsys, monkeypatch):
    write(tmp_path, "A.java", "// veriopt: Broken: x |->\n")
    write(tmp_path, "B.java", "// veriopt: R: x - x |-> zero_like(x)\n")
    monkeypatch.chdir(tmp_path)
    code, out, err = run(capsys, "extract", "*.java", "--json")
    assert code == 1
    data = json.loads(out)
    assert data["files_scanned"] == 2 and data["parse_failures"][0]["line"] == 1


def test_demo(tmp_path, capsys):
    code, out, _ = run(capsys, "demo", "--out", tmp_path)
    assert code == 0
    assert "GRAPH: PASS" in out
    assert sorted(p.name for p in tmp_path.iterdir()) == [f"subtract_chain_{i}.dot" for i in range(3)]
    assert out.splitlines()[3].split()[-1] == "p1:i32"


def test_output_is_deterministic_under_a_seed(tmp_path, capsys):
    rules = write(tmp_path, "bad.rules", "phase P { Swap: x - y |-> y - x; Drop: x + y |-> x; }")
    first = run(capsys, "verify", "--rules", rules, "--seed", 7)
    second = run(capsys, "verify", "--rules", rules, "--seed", 7)
    assert first == second


def test_usage_errors_exit_2(capsys):
    with pytest.raises(SystemExit) as info:
        main(["optimize-term"])
    assert info.value.code == 2
    with pytest.raises(SystemExit) as info:
        main(["verify", "--widths", "0,99"])
    assert info.value.code == 2
    with pytest.raises(SystemExit) as info:
        main(["verify", "--rules", "/no/such/file.rules"])
    assert info.value.code == 2


def test_parse_errors_exit_1(capsys):
    code, _, err = run(capsys, "optimize-term", "--expr", "p0:i8 +")
    assert code == 1 and err.startswith("parse error:")
