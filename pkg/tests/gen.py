"""Seeded random generators for terms, contexts and graphs used across the tests."""

import random

from hypothesis import strategies as st

from termopt.graph import BinaryNode, ConditionalNode, ConstantNode, IRGraph, ParameterNode, UnaryNode
from termopt.terms import Binary, Conditional, Constant, MethodContext, Parameter, Unary
from termopt.values import BOOL_STAMP, BinaryOp, IntegerStamp, IntVal, UnaryOp, smax, smin

VALUE_OPS = [BinaryOp.Add, BinaryOp.Sub, BinaryOp.Mul, BinaryOp.And, BinaryOp.Or, BinaryOp.Xor]
SHIFT_OPS = [BinaryOp.LeftShift, BinaryOp.RightShiftSigned, BinaryOp.RightShiftUnsigned]
COMPARE_OPS = [BinaryOp.IntegerLessThan, BinaryOp.IntegerEquals]
VALUE_UNARY = [UnaryOp.Neg, UnaryOp.Abs, UnaryOp.Not]


def stamp(rng, w):
    if rng.random() < 0.75:
        return IntegerStamp.full(w)
    lo = rng.randint(smin(w), smax(w))
    return IntegerStamp(w, lo, rng.randint(lo, smax(w)))


def atom(rng, w, nparams):
    if nparams and rng.random() < 0.7:
        return Parameter(rng.randrange(nparams), IntegerStamp.full(w))
    return Constant(IntVal(w, rng.getrandbits(w)))


def term(rng, w, depth, nparams=2):
    """Well-typed term of width ``w`` whose parameters all have full-range stamps."""
    if depth == 0 or rng.random() < 0.2:
        return atom(rng, w, nparams)
    r = rng.random()
    if r < 0.2:
        return Unary(rng.choice(VALUE_UNARY), term(rng, w, depth - 1, nparams))
    if r < 0.65:
        op = rng.choice(VALUE_OPS)
        return Binary(op, term(rng, w, depth - 1, nparams), term(rng, w, depth - 1, nparams))
    if r < 0.8:
        op = rng.choice(SHIFT_OPS)
        return Binary(op, term(rng, w, depth - 1, nparams), term(rng, w, depth - 1, nparams))
    return Conditional(
        cond(rng, w, depth - 1, nparams), term(rng, w, depth - 1, nparams), term(rng, w, depth - 1, nparams)
    )


def cond(rng, w, depth, nparams=2):
    """Well-typed boolean term (i32 holding 0 or 1)."""
    if depth == 0 or rng.random() < 0.15:
        return Constant(IntVal(32, rng.getrandbits(1)))
    if rng.random() < 0.2:
        return Unary(UnaryOp.LogicNegate, cond(rng, w, depth - 1, nparams))
    op = rng.choice(COMPARE_OPS)
    return Binary(op, term(rng, w, depth - 1, nparams), term(rng, w, depth - 1, nparams))


def wild_term(rng, depth, max_width=8, nparams=2):
    """Any shape at all: mixed widths, narrowed stamps, ill-typed operands."""
    if depth == 0 or rng.random() < 0.2:
        w = rng.randint(1, max_width)
        if nparams and rng.random() < 0.6:
            return Parameter(rng.randrange(nparams), stamp(rng, w))
        return Constant(IntVal(w, rng.getrandbits(w)))
    r = rng.random()
    if r < 0.25:
        return Unary(rng.choice(list(UnaryOp)), wild_term(rng, depth - 1, max_width, nparams))
    if r < 0.8:
        op = rng.choice(list(BinaryOp))
        return Binary(op, wild_term(rng, depth - 1, max_width, nparams), wild_term(rng, depth - 1, max_width, nparams))
    return Conditional(*(wild_term(rng, depth - 1, max_width, nparams) for _ in range(3)))


def context(rng, widths, nparams=2):
    return MethodContext(tuple(IntVal(w, rng.getrandbits(w)) for w in widths[:nparams]))


def graph(rng, max_nodes=12, nparams=2, w=3):
    """Random acyclic graph: inputs always point at lower ids, parameters first."""
    full = IntegerStamp.full(w)
    nodes = {}
    ints = []  # ids of width-w nodes
    bools = []  # ids of i32 0/1 nodes
    for i in range(nparams):
        nodes[i] = (ParameterNode(i), full)
        ints.append(i)
    n = rng.randint(nparams + 1, max_nodes)
    for nid in range(nparams, n):
        r = rng.random()
        if r < 0.15:
            v = IntVal(w, rng.getrandbits(w))
            nodes[nid] = (ConstantNode(v), IntegerStamp(w, v.signed, v.signed))
            ints.append(nid)
        elif r < 0.25:
            nodes[nid] = (UnaryNode(rng.choice(VALUE_UNARY), rng.choice(ints)), full)
            ints.append(nid)
        elif r < 0.65:
            op = rng.choice(VALUE_OPS + SHIFT_OPS)
            nodes[nid] = (BinaryNode(op, rng.choice(ints), rng.choice(ints)), full)
            ints.append(nid)
        elif r < 0.8 or not bools:
            op = rng.choice(COMPARE_OPS)
            nodes[nid] = (BinaryNode(op, rng.choice(ints), rng.choice(ints)), BOOL_STAMP)
            bools.append(nid)
        elif r < 0.85:
            nodes[nid] = (UnaryNode(UnaryOp.LogicNegate, rng.choice(bools)), BOOL_STAMP)
            bools.append(nid)
        else:
            nodes[nid] = (ConditionalNode(rng.choice(bools), rng.choice(ints), rng.choice(ints)), full)
            ints.append(nid)
    return IRGraph.of(nodes)


seeds = st.integers(0, 2**32 - 1)


def terms(w=None, depth=4, nparams=2):
    """Hypothesis strategy wrapping the seeded generator."""

    @st.composite
    def build(draw):
        width = w or draw(st.integers(1, 8))
        return term(random.Random(draw(seeds)), width, draw(st.integers(0, depth)), nparams)

    return build()
