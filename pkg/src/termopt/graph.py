"""Term graphs: shared data-flow nodes with indirection-based rewriting.

A graph maps node ids to ``(node, stamp)`` pairs.  Graphs are treated as
values; every operation returns a new graph and leaves its input alone.
"""

from __future__ import annotations

import json
import types
from collections.abc import Iterable, Mapping
from dataclasses import dataclass, replace

from .refine import CheckConfig, Counterexample, GraphMismatch, VerifiedBounded, refines
from .rules import Phase, optimize_term
from .terms import (
    Binary,
    Conditional,
    Constant,
    IRExpr,
    Leaf,
    MethodContext,
    Outcome,
    Parameter,
    Unary,
    evaluate,
    node_stamp,
)
from .values import (
    BinaryOp,
    IllegalStamp,
    IntegerStamp,
    IntVal,
    Stamp,
    UnaryOp,
    VoidStamp,
    constant_as_stamp,
    parse_value,
)


@dataclass(frozen=True, slots=True)
class ConstantNode:
    value: IntVal


@dataclass(frozen=True, slots=True)
class ParameterNode:
    index: int


@dataclass(frozen=True, slots=True)
class LeafNode:
    """A pre-evaluated value, e.g. the result of a control-flow node."""


@dataclass(frozen=True, slots=True)
class UnaryNode:
    op: UnaryOp
    arg: int


@dataclass(frozen=True, slots=True)
class BinaryNode:
    op: BinaryOp
    x: int
    y: int


@dataclass(frozen=True, slots=True)
class ConditionalNode:
    cond: int
    t: int
    f: int


@dataclass(frozen=True, slots=True)
class RefNode:
    target: int


class _NoNode:
    """Lookup-miss marker; never stored in a graph."""

    _inst = None

    def __new__(cls):
        if cls._inst is None:
            cls._inst = super().__new__(cls)
        return cls._inst

    def __repr__(self):
        return "NoNode"


NO_NODE = _NoNode()

IRNode = ConstantNode | ParameterNode | LeafNode | UnaryNode | BinaryNode | ConditionalNode | RefNode


def inputs(node: IRNode) -> tuple[int, ...]:
    match node:
        case UnaryNode(_, a) | RefNode(a):
            return (a,)
        case BinaryNode(_, a, b):
            return (a, b)
        case ConditionalNode(c, t, f):
            return (c, t, f)
    return ()


def _with_inputs(node: IRNode, ids) -> IRNode:
    match node:
        case UnaryNode(op, _):
            return UnaryNode(op, *ids)
        case BinaryNode(op, _, _):
            return BinaryNode(op, *ids)
        case ConditionalNode():
            return ConditionalNode(*ids)
        case RefNode():
            return RefNode(*ids)
    return node


# --- errors ---------------------------------------------------------------


class GraphError(Exception):
    pass


class UnknownNode(GraphError):
    def __init__(self, n: int):
        super().__init__(f"node {n} is not in the graph")
        self.node = n


class CyclicRef(GraphError):
    def __init__(self, path: list[int]):
        super().__init__("reference cycle " + " -> ".join(map(str, path)))
        self.path = path


class CyclicGraph(GraphError):
    def __init__(self, path: list[int]):
        super().__init__("data-flow cycle " + " -> ".join(map(str, path)))
        self.path = path


class ClosureViolation(GraphError):
    pass


class LeafNotPresent(GraphError):
    pass


class StampMismatch(GraphError):
    pass


class GraphFormatError(GraphError):
    pass


# --- the graph ------------------------------------------------------------


@dataclass(frozen=True)
class IRGraph:
    nodes: Mapping[int, tuple[IRNode, Stamp]]
    next_id: int

    def __post_init__(self):
        object.__setattr__(self, "nodes", types.MappingProxyType(dict(self.nodes)))
        if self.nodes and self.next_id <= max(self.nodes):
            raise ValueError("next_id must exceed every node id")

    @classmethod
    def empty(cls) -> IRGraph:
        return cls({}, 0)

    @classmethod
    def of(cls, nodes: Mapping[int, tuple[IRNode, Stamp]]) -> IRGraph:
        """Build and validate a graph, with ``next_id`` one past the largest id."""
        g = cls(nodes, max(nodes, default=-1) + 1)
        validate(g)
        return g

    def kind(self, n: int) -> IRNode | _NoNode:
        entry = self.nodes.get(n)
        return NO_NODE if entry is None else entry[0]

    def stamp(self, n: int) -> Stamp:
        if n not in self.nodes:
            raise UnknownNode(n)
        return self.nodes[n][1]

    def ids(self) -> list[int]:
        return sorted(self.nodes)

    def __len__(self):
        return len(self.nodes)

    def __contains__(self, n):
        return n in self.nodes


def validate(g: IRGraph) -> None:
    """Check closure and acyclicity; raise on the first problem found."""
    for n, (node, _) in g.nodes.items():
        if node is NO_NODE or not isinstance(node, IRNode):
            raise GraphFormatError(f"node {n} has invalid kind {node!r}")
        for i in inputs(node):
            if i not in g.nodes:
                raise ClosureViolation(f"node {n} references missing node {i}")
    _check_acyclic(g)


def _check_acyclic(g: IRGraph) -> None:
    state: dict[int, int] = {}  # 1 on the current path, 2 finished
    for root in g.ids():
        if root in state:
            continue
        path = [root]
        stack = [iter(inputs(g.nodes[root][0]))]
        state[root] = 1
        while stack:
            nxt = next(stack[-1], None)
            if nxt is None:
                state[path.pop()] = 2
                stack.pop()
            elif state.get(nxt) == 1:
                raise CyclicGraph(path[path.index(nxt) :] + [nxt])
            elif nxt not in state:
                state[nxt] = 1
                path.append(nxt)
                stack.append(iter(inputs(g.nodes[nxt][0])))


def resolve(g: IRGraph, n: int) -> int:
    seen = []
    while True:
        node = g.kind(n)
        if node is NO_NODE:
            raise UnknownNode(n)
        if not isinstance(node, RefNode):
            return n
        if n in seen:
            raise CyclicRef(seen[seen.index(n) :] + [n])
        seen.append(n)
        n = node.target


def extract_term(g: IRGraph, n: int) -> IRExpr:
    """The term represented at ``n``; shared sub-graphs yield shared term objects."""
    memo: dict[int, IRExpr] = {}
    path: list[int] = []

    def go(m: int) -> IRExpr:
        r = resolve(g, m)
        if r in memo:
            return memo[r]
        if r in path:
            raise CyclicGraph(path[path.index(r) :] + [r])
        path.append(r)
        node, stamp = g.nodes[r]
        match node:
            case ConstantNode(v):
                e = Constant(v)
            case ParameterNode(i):
                e = Parameter(i, _int_stamp(stamp, r))
            case LeafNode():
                e = Leaf(r, _int_stamp(stamp, r))
            case UnaryNode(op, a):
                e = Unary(op, go(a))
            case BinaryNode(op, a, b):
                e = Binary(op, go(a), go(b))
            case ConditionalNode(c, t, f):
                e = Conditional(go(c), go(t), go(f))
            case _:
                raise GraphFormatError(f"node {r} has invalid kind {node!r}")
        path.pop()
        memo[r] = e
        return e

    return go(n)


def _int_stamp(s: Stamp, n: int) -> IntegerStamp:
    if not isinstance(s, IntegerStamp):
        raise StampMismatch(f"node {n} needs an integer stamp, has {s}")
    return s


def _normalize(g: IRGraph, node: IRNode) -> IRNode:
    return _with_inputs(node, [resolve(g, i) for i in inputs(node)])


def find_matching(g: IRGraph, node: IRNode, stamp: Stamp, forbidden: Iterable[int] = ()) -> int | None:
    """Smallest non-forbidden id holding ``node`` (inputs compared after resolve) at ``stamp``."""
    if node is NO_NODE or isinstance(node, RefNode):
        raise ValueError("cannot match a RefNode or NoNode")
    forbidden = set(forbidden)
    try:
        want = _normalize(g, node)
    except GraphError:
        return None  # an input outside the graph cannot match anything
    for m in g.ids():
        have, s = g.nodes[m]
        if m in forbidden or isinstance(have, RefNode) or s != stamp:
            continue
        if _normalize(g, have) == want:
            return m
    return None


def insert_term(g: IRGraph, e: IRExpr, forbidden: Iterable[int] = ()) -> tuple[IRGraph, int]:
    """Add ``e`` to ``g`` bottom-up, reusing matching nodes; return the new graph and root id."""
    forbidden = set(forbidden)
    nodes = dict(g.nodes)
    next_id = g.next_id
    # Equivalent to find_matching at every step, but indexed: ids ascend so
    # setdefault keeps the smallest, and fresh nodes always have larger ids.
    index: dict[tuple[IRNode, Stamp], int] = {}
    for m in g.ids():
        node, s = nodes[m]
        if m not in forbidden and not isinstance(node, RefNode):
            index.setdefault((_normalize(g, node), s), m)
    memo: dict[int, int] = {}

    def ins(t: IRExpr) -> int:
        nonlocal next_id
        if id(t) in memo:
            return memo[id(t)]
        match t:
            case Leaf(m, s):
                node = g.kind(m)
                if not isinstance(node, LeafNode):
                    raise LeafNotPresent(f"no leaf node {m} in the graph")
                if g.nodes[m][1] != s:
                    raise StampMismatch(f"leaf {m} has stamp {g.nodes[m][1]}, term expects {s}")
                memo[id(t)] = m
                return m
            case Constant(v):
                node, s = ConstantNode(v), constant_as_stamp(v)
            case Parameter(i, s):
                node = ParameterNode(i)
            case Unary(op, a):
                kid = ins(a)
                node, s = UnaryNode(op, kid), node_stamp(t, [nodes[kid][1]])
            case Binary(op, a, b):
                ka, kb = ins(a), ins(b)
                node, s = BinaryNode(op, ka, kb), node_stamp(t, [nodes[ka][1], nodes[kb][1]])
            case Conditional(c, tt, ff):
                kids = [ins(c), ins(tt), ins(ff)]
                node, s = ConditionalNode(*kids), node_stamp(t, [nodes[k][1] for k in kids])
            case _:
                raise TypeError(f"not a ground term: {t!r}")
        found = index.get((node, s))
        if found is None:
            found = next_id
            next_id += 1
            nodes[found] = (node, s)
            index[(node, s)] = found
        memo[id(t)] = found
        return found

    root = ins(e)
    if next_id == g.next_id:
        return g, root
    return IRGraph(nodes, next_id), root


def graph_eval(g: IRGraph, n: int, ctx: MethodContext) -> Outcome:
    return evaluate(ctx, extract_term(g, n))


def ancestors(g: IRGraph, n: int) -> set[int]:
    """Every node from which ``n`` is reachable, excluding ``n`` itself."""
    users: dict[int, list[int]] = {}
    for m, (node, _) in g.nodes.items():
        for i in inputs(node):
            users.setdefault(i, []).append(m)
    out: set[int] = set()
    todo = [n]
    while todo:
        for u in users.get(todo.pop(), ()):
            if u not in out:
                out.add(u)
                todo.append(u)
    out.discard(n)
    return out


def rewrite_at(g: IRGraph, n: int, phase: Phase) -> tuple[IRGraph, bool]:
    """Optimize the term at ``n`` and redirect ``n`` to the result."""
    e1 = extract_term(g, n)
    e2 = optimize_term(phase, e1)
    if e2 == e1:
        return g, False
    g1, target = insert_term(g, e2, ancestors(g, n) | {n})
    nodes = dict(g1.nodes)
    nodes[n] = (RefNode(target), g.nodes[n][1])
    return IRGraph(nodes, g1.next_id), True


def optimize_graph(g: IRGraph, phase: Phase, order: Iterable[int] | None = None) -> tuple[IRGraph, list[int]]:
    """Rewrite at each node of ``order`` (default: all ids, ascending); return the changed ids."""
    changed = []
    for n in g.ids() if order is None else order:
        if isinstance(g.kind(n), RefNode):
            continue
        g, did = rewrite_at(g, n, phase)
        if did:
            changed.append(n)
    return g, changed


def check_graph_refinement(g1: IRGraph, g2: IRGraph, cfg: CheckConfig | None = None):
    """Every term represented in ``g1`` must be refined by the term at the same id in ``g2``."""
    missing = sorted(set(g1.nodes) - set(g2.nodes))
    if missing:
        return GraphMismatch("nodes missing from the refined graph", tuple(missing))
    total = 0
    for n in g1.ids():
        try:
            e1 = extract_term(g1, n)
        except GraphError:
            continue
        try:
            e2 = extract_term(g2, n)
        except GraphError as exc:
            return GraphMismatch(f"node {n} no longer represents a term ({exc})", (n,))
        v = refines(e1, e2, cfg, salt=n)
        match v:
            case Counterexample():
                return replace(v, node=n)
            case VerifiedBounded(k):
                total += k
    return VerifiedBounded(total)


# --- serialization --------------------------------------------------------

UNARY_KINDS = {
    UnaryOp.Neg: "NegateNode",
    UnaryOp.Abs: "AbsNode",
    UnaryOp.Not: "NotNode",
    UnaryOp.LogicNegate: "LogicNegationNode",
}
BINARY_KINDS = {
    BinaryOp.Add: "AddNode",
    BinaryOp.Sub: "SubNode",
    BinaryOp.Mul: "MulNode",
    BinaryOp.And: "AndNode",
    BinaryOp.Or: "OrNode",
    BinaryOp.Xor: "XorNode",
    BinaryOp.LeftShift: "LeftShiftNode",
    BinaryOp.RightShiftSigned: "RightShiftNode",
    BinaryOp.RightShiftUnsigned: "UnsignedRightShiftNode",
    BinaryOp.IntegerLessThan: "IntegerLessThanNode",
    BinaryOp.IntegerEquals: "IntegerEqualsNode",
}
_UNARY_BY_NAME = {v: k for k, v in UNARY_KINDS.items()}
_BINARY_BY_NAME = {v: k for k, v in BINARY_KINDS.items()}


def kind_name(node: IRNode) -> str:
    match node:
        case UnaryNode(op, _):
            return UNARY_KINDS[op]
        case BinaryNode(op, _, _):
            return BINARY_KINDS[op]
    return type(node).__name__


def _stamp_doc(s: Stamp) -> dict:
    match s:
        case IntegerStamp(w, lo, hi):
            return {"type": "int", "width": w, "lo": lo, "hi": hi}
        case VoidStamp():
            return {"type": "void"}
    return {"type": "illegal"}


def _stamp_from(d) -> Stamp:
    match d:
        case {"type": "int", "width": w, "lo": lo, "hi": hi}:
            return IntegerStamp(w, lo, hi)
        case {"type": "int", "width": w}:
            return IntegerStamp.full(w)
        case {"type": "void"}:
            return VoidStamp()
        case {"type": "illegal"}:
            return IllegalStamp()
    raise GraphFormatError(f"bad stamp {d!r}")


def _node_doc(n: int, node: IRNode, s: Stamp) -> dict:
    doc = {"id": n, "kind": kind_name(node), "inputs": list(inputs(node))}
    match node:
        case ConstantNode(v):
            doc["value"] = str(v)
        case ParameterNode(i):
            doc["index"] = i
    doc["stamp"] = _stamp_doc(s)
    return doc


_ARITY = {"ConditionalNode": 3, "RefNode": 1, "ConstantNode": 0, "ParameterNode": 0, "LeafNode": 0}


def _node_from(d: dict) -> tuple[int, IRNode, Stamp]:
    try:
        n, kind, ins = d["id"], d["kind"], d.get("inputs", [])
        if not isinstance(n, int) or n < 0 or not all(isinstance(i, int) for i in ins):
            raise GraphFormatError(f"bad node ids in {d!r}")
        s = _stamp_from(d.get("stamp"))
        arity = 1 if kind in _UNARY_BY_NAME else 2 if kind in _BINARY_BY_NAME else _ARITY.get(kind)
        if arity is None:
            raise GraphFormatError(f"unknown node kind {kind!r}")
        if len(ins) != arity:
            raise GraphFormatError(f"{kind} {n} needs {arity} inputs, got {len(ins)}")
        match kind:
            case "ConstantNode":
                node = ConstantNode(parse_value(d["value"]))
            case "ParameterNode":
                node = ParameterNode(int(d["index"]))
            case "LeafNode":
                node = LeafNode()
            case "RefNode":
                node = RefNode(*ins)
            case "ConditionalNode":
                node = ConditionalNode(*ins)
            case _ if kind in _UNARY_BY_NAME:
                node = UnaryNode(_UNARY_BY_NAME[kind], *ins)
            case _:
                node = BinaryNode(_BINARY_BY_NAME[kind], *ins)
    except (KeyError, TypeError, ValueError) as exc:
        raise GraphFormatError(f"bad node {d!r}: {exc}") from exc
    return n, node, s


def load_graph(text: str) -> IRGraph:
    if not text.strip():
        return IRGraph.empty()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise GraphFormatError(f"invalid JSON: {exc}") from exc
    if not isinstance(doc, dict) or not isinstance(doc.get("nodes", []), list):
        raise GraphFormatError('expected an object with a "nodes" list')
    nodes: dict[int, tuple[IRNode, Stamp]] = {}
    for d in doc.get("nodes", []):
        if not isinstance(d, dict):
            raise GraphFormatError(f"bad node {d!r}")
        n, node, s = _node_from(d)
        if n in nodes:
            raise GraphFormatError(f"duplicate node id {n}")
        nodes[n] = (node, s)
    return IRGraph.of(nodes)


def save_graph(g: IRGraph) -> str:
    rows = [json.dumps(_node_doc(n, *g.nodes[n])) for n in g.ids()]
    if not rows:
        return '{"nodes": []}\n'
    return '{"nodes": [\n  ' + ",\n  ".join(rows) + "\n]}\n"


def dot_export(g: IRGraph, title: str = "G") -> str:
    out = [f"digraph {title} {{", "  node [shape=record];"]
    for n in g.ids():
        node, s = g.nodes[n]
        detail = str(s)
        match node:
            case ConstantNode(v):
                detail = str(v)
            case ParameterNode(i):
                detail = f"p{i} : {s}"
        label = f"{n}: {kind_name(node)}|{detail}"
        style = ' style=dashed color=purple' if isinstance(node, RefNode) else ""
        out.append(f'  n{n} [label="{{{label}}}"{style}];')
    for n in g.ids():
        node = g.nodes[n][0]
        for k, i in enumerate(inputs(node)):
            attrs = " [style=dashed color=purple]" if isinstance(node, RefNode) else f' [label="{k}"]'
            out.append(f"  n{n} -> n{i}{attrs};")
    out.append("}")
    return "\n".join(out) + "\n"
