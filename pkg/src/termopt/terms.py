"""Side-effect-free expression terms and their big-step semantics."""

from __future__ import annotations

import enum
from collections.abc import Iterator, Mapping
from dataclasses import dataclass, field

from .values import (
    BOOL_STAMP,
    UNDEF,
    BinaryOp,
    IllegalStamp,
    IntegerStamp,
    IntVal,
    Stamp,
    UnaryOp,
    Value,
    bin_eval,
    constant_as_stamp,
    join_stamps,
    unary_eval,
    valid_value,
)


@dataclass(frozen=True, slots=True)
class Unary:
    op: UnaryOp
    arg: IRExpr


@dataclass(frozen=True, slots=True)
class Binary:
    op: BinaryOp
    left: IRExpr
    right: IRExpr


@dataclass(frozen=True, slots=True)
class Conditional:
    cond: IRExpr
    true_branch: IRExpr
    false_branch: IRExpr


@dataclass(frozen=True, slots=True)
class Parameter:
    index: int
    stamp: IntegerStamp

    def __post_init__(self):
        if self.index < 0:
            raise ValueError("negative parameter index")
        if not isinstance(self.stamp, IntegerStamp):
            raise TypeError(f"parameter stamp must be an integer stamp, got {self.stamp}")


@dataclass(frozen=True, slots=True)
class Leaf:
    node_id: int
    stamp: IntegerStamp

    def __post_init__(self):
        if not isinstance(self.stamp, IntegerStamp):
            raise TypeError(f"leaf stamp must be an integer stamp, got {self.stamp}")


@dataclass(frozen=True, slots=True)
class Constant:
    value: IntVal

    def __post_init__(self):
        if not isinstance(self.value, IntVal):
            raise TypeError("constants must hold an integer value")


IRExpr = Unary | Binary | Conditional | Parameter | Leaf | Constant


def children(e) -> tuple:
    match e:
        case Unary(_, a):
            return (a,)
        case Binary(_, a, b):
            return (a, b)
        case Conditional(c, t, f):
            return (c, t, f)
    return ()


def with_children(e, kids):
    """Rebuild a composite node around new children (identity for atoms)."""
    match e:
        case Unary(op, _):
            return Unary(op, *kids)
        case Binary(op, _, _):
            return Binary(op, *kids)
        case Conditional():
            return Conditional(*kids)
    return e


def subterms(e) -> Iterator:
    """Pre-order walk over ``e`` and all of its sub-terms."""
    stack = [e]
    while stack:
        t = stack.pop()
        yield t
        stack.extend(reversed(children(t)))


def term_size(e) -> int:
    return sum(1 for _ in subterms(e))


# --- contexts and evaluation ----------------------------------------------


@dataclass(frozen=True)
class MethodContext:
    """Parameter values ``p`` plus pre-computed leaf values ``m``."""

    params: tuple[IntVal, ...] = ()
    method_state: Mapping[int, IntVal] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "params", tuple(self.params))
        for v in (*self.params, *self.method_state.values()):
            if not isinstance(v, IntVal):
                raise TypeError(f"context values must be integers, got {v!r}")

    def __str__(self):
        ps = ", ".join(f"p{i}={v}" for i, v in enumerate(self.params))
        ms = ", ".join(f"n{k}={v}" for k, v in sorted(self.method_state.items()))
        return f"[{ms}; {ps}]" if ms else f"[{ps}]"


class Reason(enum.Enum):
    BadIndex = "BadIndex"
    MissingLeaf = "MissingLeaf"
    StampViolation = "StampViolation"
    TypeMismatch = "TypeMismatch"
    BadCondition = "BadCondition"


@dataclass(frozen=True, slots=True)
class NotDefined:
    """The term is not well formed in the context."""

    reason: Reason

    def __str__(self):
        return f"notdefined({self.reason.value})"


Outcome = IntVal | NotDefined


def evaluate(ctx: MethodContext, e: IRExpr) -> Outcome:
    match e:
        case Constant(v):
            return v
        case Parameter(i, s):
            if i >= len(ctx.params):
                return NotDefined(Reason.BadIndex)
            v = ctx.params[i]
            return v if valid_value(v, s) else NotDefined(Reason.StampViolation)
        case Leaf(n, s):
            v = ctx.method_state.get(n)
            if v is None:
                return NotDefined(Reason.MissingLeaf)
            return v if valid_value(v, s) else NotDefined(Reason.StampViolation)
        case Unary(op, a):
            x = evaluate(ctx, a)
            if isinstance(x, NotDefined):
                return x
            r = unary_eval(op, x)
            return NotDefined(Reason.TypeMismatch) if r is UNDEF else r
        case Binary(op, a, b):
            x = evaluate(ctx, a)
            if isinstance(x, NotDefined):
                return x
            y = evaluate(ctx, b)
            if isinstance(y, NotDefined):
                return y
            r = bin_eval(op, x, y)
            return NotDefined(Reason.TypeMismatch) if r is UNDEF else r
        case Conditional(c, t, f):
            x = evaluate(ctx, c)
            if isinstance(x, NotDefined):
                return x
            if x.width != 32 or x.bits > 1:
                return NotDefined(Reason.BadCondition)
            return evaluate(ctx, t if x.bits else f)
    raise TypeError(f"not a ground term: {e!r}")


def _full(s: Stamp) -> Stamp:
    if isinstance(s, IntegerStamp):
        return IntegerStamp.full(s.width)
    return IllegalStamp()


def infer_stamp(e: IRExpr) -> Stamp:
    """Conservative static type of ``e``; sound for every defined evaluation."""
    return node_stamp(e, [infer_stamp(k) for k in children(e)])


def node_stamp(e: IRExpr, kid_stamps) -> Stamp:
    """Stamp of ``e``'s root given the stamps of its children."""
    match e:
        case Constant(v):
            return constant_as_stamp(v)
        case Parameter(_, s) | Leaf(_, s):
            return s
        case Unary(op, _):
            (s,) = kid_stamps
            if op is UnaryOp.LogicNegate:
                ok = isinstance(s, IntegerStamp) and s.width == 32
                return BOOL_STAMP if ok else IllegalStamp()
            return _full(s)
        case Binary(op, _, _):
            s1, s2 = kid_stamps
            if not isinstance(s1, IntegerStamp) or not isinstance(s2, IntegerStamp):
                return IllegalStamp()
            if op.is_shift:
                return IntegerStamp.full(s1.width)
            if s1.width != s2.width:
                return IllegalStamp()
            return BOOL_STAMP if op.is_comparison else IntegerStamp.full(s1.width)
        case Conditional():
            _, st, sf = kid_stamps
            return join_stamps(st, sf)
    return IllegalStamp()


def params_of(e) -> dict[int, set[IntegerStamp]]:
    """Parameter index -> the stamps it is referenced with inside ``e``."""
    out: dict[int, set[IntegerStamp]] = {}
    for t in subterms(e):
        if isinstance(t, Parameter):
            out.setdefault(t.index, set()).add(t.stamp)
    return out


def leaves_of(e) -> dict[int, set[IntegerStamp]]:
    out: dict[int, set[IntegerStamp]] = {}
    for t in subterms(e):
        if isinstance(t, Leaf):
            out.setdefault(t.node_id, set()).add(t.stamp)
    return out
