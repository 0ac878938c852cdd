"""Evaluate one term over many contexts at once with numpy.

This mirrors :func:`termopt.terms.evaluate` column-wise so the bounded
refinement checker can sweep large context sets quickly.  Each context
row holds, per parameter or leaf slot, either a value or "absent".  Every
counterexample found here is replayed through the scalar evaluator.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .terms import Binary, Conditional, Constant, Leaf, Parameter, Unary
from .values import BinaryOp, UnaryOp

U64 = np.uint64
_ONE = U64(1)
_ALL = U64(0xFFFF_FFFF_FFFF_FFFF)


def width_mask(w):
    w = np.asarray(w, dtype=U64)
    return np.where(w >= 64, _ALL, (_ONE << np.minimum(w, U64(63))) - _ONE)


def sext(bits, w):
    """Signed reading of ``bits`` at width ``w`` as int64."""
    w = np.asarray(w, dtype=U64)
    sign = _ONE << (np.maximum(w, _ONE) - _ONE)
    return ((bits ^ sign) - sign).view(np.int64)


@dataclass
class Column:
    defined: np.ndarray  # bool
    width: np.ndarray  # uint64
    bits: np.ndarray  # uint64


@dataclass
class ContextBatch:
    size: int
    params: dict[int, Column] = field(default_factory=dict)
    leaves: dict[int, Column] = field(default_factory=dict)


def _undefined(n: int) -> Column:
    return Column(np.zeros(n, bool), np.zeros(n, U64), np.zeros(n, U64))


def _slot(col: Column | None, stamp, n: int) -> Column:
    if col is None:
        return _undefined(n)
    w = U64(stamp.width)
    s = sext(col.bits, w)
    ok = col.defined & (col.width == w) & (s >= stamp.lo) & (s <= stamp.hi)
    return Column(ok, col.width, col.bits)


def batch_evaluate(batch: ContextBatch, e) -> Column:
    n = batch.size
    match e:
        case Constant(v):
            return Column(np.ones(n, bool), np.full(n, v.width, U64), np.full(n, v.bits, U64))
        case Parameter(i, s):
            return _slot(batch.params.get(i), s, n)
        case Leaf(k, s):
            return _slot(batch.leaves.get(k), s, n)
        case Unary(op, a):
            return _unary(op, batch_evaluate(batch, a))
        case Binary(op, a, b):
            return _binary(op, batch_evaluate(batch, a), batch_evaluate(batch, b))
        case Conditional(c, t, f):
            x = batch_evaluate(batch, c)
            ok = x.defined & (x.width == U64(32)) & (x.bits <= _ONE)
            sel = x.bits == _ONE
            yt, yf = batch_evaluate(batch, t), batch_evaluate(batch, f)
            return Column(
                ok & np.where(sel, yt.defined, yf.defined),
                np.where(sel, yt.width, yf.width),
                np.where(sel, yt.bits, yf.bits),
            )
    raise TypeError(f"not a ground term: {e!r}")


def _unary(op: UnaryOp, x: Column) -> Column:
    m = width_mask(x.width)
    match op:
        case UnaryOp.Neg:
            return Column(x.defined, x.width, (U64(0) - x.bits) & m)
        case UnaryOp.Abs:
            neg = sext(x.bits, x.width) < 0
            return Column(x.defined, x.width, np.where(neg, (U64(0) - x.bits) & m, x.bits))
        case UnaryOp.Not:
            return Column(x.defined, x.width, ~x.bits & m)
        case UnaryOp.LogicNegate:
            ok = x.defined & (x.width == U64(32)) & (x.bits <= _ONE)
            return Column(ok, x.width, x.bits ^ _ONE)
    raise AssertionError(op)


def _binary(op: BinaryOp, x: Column, y: Column) -> Column:
    w = x.width
    m = width_mask(w)
    both = x.defined & y.defined
    if op.is_shift:
        ok = both & (y.bits < w)
        amt = np.where(ok, y.bits, U64(0))
        match op:
            case BinaryOp.LeftShift:
                r = (x.bits << amt) & m
            case BinaryOp.RightShiftSigned:
                r = (sext(x.bits, w) >> amt.astype(np.int64)).view(U64) & m
            case _:
                r = x.bits >> amt
        return Column(ok, w, r)
    ok = both & (w == y.width)
    match op:
        case BinaryOp.Add:
            r = (x.bits + y.bits) & m
        case BinaryOp.Sub:
            r = (x.bits - y.bits) & m
        case BinaryOp.Mul:
            r = (x.bits * y.bits) & m
        case BinaryOp.And:
            r = x.bits & y.bits
        case BinaryOp.Or:
            r = x.bits | y.bits
        case BinaryOp.Xor:
            r = x.bits ^ y.bits
        case BinaryOp.IntegerLessThan:
            r = (sext(x.bits, w) < sext(y.bits, w)).astype(U64)
            return Column(ok, np.full_like(w, 32), r)
        case BinaryOp.IntegerEquals:
            r = (x.bits == y.bits).astype(U64)
            return Column(ok, np.full_like(w, 32), r)
        case _:
            raise AssertionError(op)
    return Column(ok, w, r)
