"""Bounded refinement checking for terms and rewrite rules.

``e1`` is refined by ``e2`` when, in every context where ``e1`` is well
formed, ``e2`` is well formed too and has the same value.  Here that is
checked over a finite context set: every value for parameters whose width
is in ``exhaustive_widths``, and corner plus seeded random values for the
rest.  A pass therefore means "verified up to the bound", never "proved".
"""

from __future__ import annotations

import itertools
from collections.abc import Iterator
from dataclasses import dataclass, replace

import numpy as np

from .batch import U64, Column, ContextBatch, batch_evaluate
from .rules import (
    CondAnd,
    CondNot,
    CondOr,
    ConstVar,
    InstantiationError,
    MetaVar,
    RewriteRule,
    StampUnder,
    Substitution,
    WidthEq,
    eval_condition,
    pattern_vars,
    substitute,
)
from .terms import (
    Binary,
    Constant,
    IRExpr,
    MethodContext,
    Outcome,
    Parameter,
    Unary,
    evaluate,
    leaves_of,
    params_of,
)
from .values import BOOL_STAMP, BinaryOp, IntegerStamp, IntVal, UnaryOp, mask, smax, smin


@dataclass(frozen=True)
class CheckConfig:
    exhaustive_widths: frozenset[int] = frozenset({1, 2, 4})
    sample_widths: frozenset[int] = frozenset({8, 32, 64})
    samples_per_width: int = 256
    max_instantiation_depth: int = 2
    rng_seed: int = 0
    max_contexts: int = 1 << 20
    random_instantiations: int = 16

    def __post_init__(self):
        object.__setattr__(self, "exhaustive_widths", frozenset(self.exhaustive_widths))
        object.__setattr__(self, "sample_widths", frozenset(self.sample_widths))
        for w in self.exhaustive_widths | self.sample_widths:
            if not 1 <= w <= 64:
                raise ValueError(f"width {w} outside 1..64")


# --- verdicts -------------------------------------------------------------


@dataclass(frozen=True)
class VerifiedBounded:
    contexts_checked: int

    def __bool__(self):
        return True


@dataclass(frozen=True)
class Counterexample:
    lhs: IRExpr
    rhs: IRExpr
    context: MethodContext
    lhs_result: Outcome
    rhs_result: Outcome
    instantiation: Substitution | None = None
    node: int | None = None

    def __bool__(self):
        return False

    def replays(self) -> bool:
        """Re-evaluating both sides reproduces the recorded disagreement."""
        a, b = evaluate(self.context, self.lhs), evaluate(self.context, self.rhs)
        return a == self.lhs_result and b == self.rhs_result and isinstance(a, IntVal) and a != b


@dataclass(frozen=True)
class Inapplicable:
    reason: str

    def __bool__(self):
        return True


@dataclass(frozen=True)
class GraphMismatch:
    """Graph refinement failed structurally (missing node or no term)."""

    reason: str
    nodes: tuple[int, ...] = ()

    def __bool__(self):
        return False


Verdict = VerifiedBounded | Counterexample | Inapplicable | GraphMismatch


# --- context enumeration --------------------------------------------------


@dataclass
class _Slot:
    kind: str  # "p" or "m"
    key: int
    stamps: list[IntegerStamp]
    exhaustive: bool = False

    @property
    def widths(self) -> set[int]:
        return {s.width for s in self.stamps}


def _in_ranges(x: int, stamps) -> bool:
    return any(s.lo <= x <= s.hi for s in stamps)


def _domain(slot: _Slot, exhaustive: bool) -> list[tuple[int, int]]:
    """(width, signed value) pairs admitted by at least one occurrence stamp."""
    out = []
    for w in sorted(slot.widths):
        ss = [s for s in slot.stamps if s.width == w]
        if exhaustive:
            xs = sorted({x for s in ss for x in range(s.lo, s.hi + 1)})
        else:
            cands = {0, 1, -1, smin(w), smax(w)}
            for s in ss:
                cands |= {s.lo, s.hi, s.lo + 1, s.hi - 1}
            xs = sorted(x for x in cands if _in_ranges(x, ss))
        out.extend((w, x) for x in xs)
    return out


def _column(entries: list[tuple[int, int] | None], idx: np.ndarray) -> Column:
    present = np.array([e is not None for e in entries], bool)
    widths = np.array([e[0] if e else 0 for e in entries], U64)
    bits = np.array([(e[1] & mask(e[0])) if e else 0 for e in entries], U64)
    return Column(present[idx], widths[idx], bits[idx])


class ContextSpace:
    """The enumerated contexts for checking ``e1`` against ``e2``."""

    def __init__(self, e1: IRExpr, e2: IRExpr, cfg: CheckConfig, salt: int = 0):
        self.slots: list[_Slot] = []
        for kind, table in (("p", _merge(params_of(e1), params_of(e2))), ("m", _merge(leaves_of(e1), leaves_of(e2)))):
            for key in sorted(table):
                stamps = sorted(table[key], key=lambda s: (s.width, s.lo, s.hi))
                self.slots.append(_Slot(kind, key, stamps))
        rng = np.random.default_rng([cfg.rng_seed, salt])

        for s in self.slots:
            s.exhaustive = s.widths <= cfg.exhaustive_widths
        doms = {id(s): _domain(s, s.exhaustive) for s in self.slots}
        # shrink: demote the biggest exhaustive slots to sampling until the grid fits
        while True:
            exh = [s for s in self.slots if s.exhaustive]
            size = int(np.prod([len(doms[id(s)]) + 1 for s in exh], dtype=object)) if exh else 1
            if size <= cfg.max_contexts:
                break
            big = max(exh, key=lambda s: len(doms[id(s)]))
            big.exhaustive = False
            doms[id(big)] = _domain(big, False)

        entries = {id(s): [*doms[id(s)], None] for s in self.slots}
        shape = [len(entries[id(s)]) for s in self.slots]
        grid = int(np.prod(shape, dtype=object)) if shape else 1
        if grid <= cfg.max_contexts:
            idx = list(np.unravel_index(np.arange(grid), shape)) if shape else []
        else:
            exh = [i for i, s in enumerate(self.slots) if s.exhaustive]
            eshape = [shape[i] for i in exh]
            esize = int(np.prod(eshape)) if eshape else 1
            reps = max(1, cfg.max_contexts // esize)
            eidx = np.unravel_index(np.arange(esize), eshape) if eshape else []
            idx = [None] * len(self.slots)
            for j, i in enumerate(exh):
                idx[i] = np.repeat(eidx[j], reps)
            for i, s in enumerate(self.slots):
                if idx[i] is None:
                    idx[i] = rng.integers(0, shape[i], esize * reps)
        self.columns: list[Column] = [_column(entries[id(s)], ix) for s, ix in zip(self.slots, idx)]
        n = len(idx[0]) if idx else 1

        sampled_widths = {w for s in self.slots if not s.exhaustive for w in s.widths}
        extra = cfg.samples_per_width * len(sampled_widths)
        if extra:
            for i, s in enumerate(self.slots):
                self.columns[i] = _concat(self.columns[i], self._random(s, entries[id(s)], extra, rng))
            n += extra
        self.size = n

    @staticmethod
    def _random(slot: _Slot, entries, count: int, rng) -> Column:
        if slot.exhaustive:
            return _column(entries, rng.integers(0, len(entries), count))
        which = rng.integers(0, len(slot.stamps), count)
        width = np.zeros(count, U64)
        bits = np.zeros(count, U64)
        for k, s in enumerate(slot.stamps):
            sel = which == k
            xs = rng.integers(s.lo, s.hi, size=int(sel.sum()), endpoint=True, dtype=np.int64)
            width[sel] = s.width
            bits[sel] = xs.view(U64) & U64(mask(s.width))
        return Column(np.ones(count, bool), width, bits)

    def batch(self) -> ContextBatch:
        b = ContextBatch(self.size)
        for s, col in zip(self.slots, self.columns):
            (b.params if s.kind == "p" else b.leaves)[s.key] = col
        return b

    def context(self, row: int) -> MethodContext:
        """Materialise one row; an absent parameter gets a value no stamp admits."""
        params: dict[int, IntVal] = {}
        absent: dict[int, IntVal] = {}
        state: dict[int, IntVal] = {}
        for s, col in zip(self.slots, self.columns):
            if not col.defined[row]:
                if s.kind == "p":
                    absent[s.key] = _sentinel(s)
                continue
            v = IntVal(int(col.width[row]), int(col.bits[row]))
            (params if s.kind == "p" else state)[s.key] = v
        length = max(params) + 1 if params else 0
        plist = tuple(params.get(i) or absent.get(i) or IntVal(1, 0) for i in range(length))
        return MethodContext(plist, state)


def _merge(a: dict, b: dict) -> dict:
    out = {k: set(v) for k, v in a.items()}
    for k, v in b.items():
        out.setdefault(k, set()).update(v)
    return out


def _concat(a: Column, b: Column) -> Column:
    return Column(
        np.concatenate([a.defined, b.defined]),
        np.concatenate([a.width, b.width]),
        np.concatenate([a.bits, b.bits]),
    )


def _sentinel(slot: _Slot) -> IntVal:
    w = next(w for w in range(1, 65) if w not in slot.widths)
    return IntVal(w, 0)


# --- checks ---------------------------------------------------------------


def refines(e1: IRExpr, e2: IRExpr, cfg: CheckConfig | None = None, *, salt: int = 0) -> Verdict:
    cfg = cfg or CheckConfig()
    space = ContextSpace(e1, e2, cfg, salt)
    batch = space.batch()
    a = batch_evaluate(batch, e1)
    b = batch_evaluate(batch, e2)
    agree = b.defined & (a.width == b.width) & (a.bits == b.bits)
    bad = a.defined & ~agree
    if bad.any():
        ctx = space.context(int(np.argmax(bad)))
        cex = Counterexample(e1, e2, ctx, evaluate(ctx, e1), evaluate(ctx, e2))
        if not cex.replays():
            raise AssertionError(f"batch and scalar evaluation disagree in {ctx}")
        return cex
    checked = int(a.defined.sum())
    if checked == 0:
        return Inapplicable("left-hand side is not well formed in any enumerated context")
    return VerifiedBounded(checked)


def check_monotone(outer, e1: IRExpr, e2: IRExpr, cfg: CheckConfig | None = None) -> Verdict:
    """Check ``outer[e1]`` is refined by ``outer[e2]``; ``outer`` has one metavariable hole."""
    holes = pattern_vars(outer)
    if len(holes) != 1:
        raise ValueError("outer context must contain exactly one hole")
    (h,) = holes
    return refines(substitute(outer, {h: e1}), substitute(outer, {h: e2}), cfg)


def check_rule_soundness(rule: RewriteRule, cfg: CheckConfig | None = None) -> Verdict:
    """Check ``cond ==> lhs refined by rhs`` over generated instantiations."""
    cfg = cfg or CheckConfig()
    satisfied = 0
    total = 0
    for k, s in enumerate(instantiations(rule, cfg)):
        if not eval_condition(rule.cond, s):
            continue
        try:
            lhs, rhs = substitute(rule.lhs, s), substitute(rule.rhs, s)
        except InstantiationError:
            continue
        satisfied += 1
        v = refines(lhs, rhs, cfg, salt=k)
        if isinstance(v, Counterexample):
            return replace(v, instantiation=s)
        if isinstance(v, VerifiedBounded):
            total += v.contexts_checked
    if not satisfied:
        return Inapplicable("no instantiation satisfies the rule condition")
    if not total:
        return Inapplicable("left-hand side is never well formed")
    return VerifiedBounded(total)


# --- instantiation generator ----------------------------------------------


def _corners(w: int) -> list[int]:
    return list(dict.fromkeys([0, 1 if w > 1 else -1, -1, smin(w), smax(w)]))


def _narrow(w: int) -> list[IntegerStamp]:
    lo, hi = smin(w), smax(w)
    half = hi // 2
    ranges = [(0, 0), (0, half), (half + 1, hi), (lo, -1), (-1, 0), (lo, lo)]
    return [IntegerStamp(w, a, b) for a, b in dict.fromkeys(ranges) if lo <= a <= b <= hi]


def _candidates(k: int, metas: int, w: int, depth: int) -> list:
    """Terms one metavariable may stand for; parameter ``k`` is its own."""
    own = Parameter(k, IntegerStamp.full(w))
    other = Parameter((k + 1) % metas if metas > 1 else 1, IntegerStamp.full(w))
    alt = 32 if w != 32 else 8
    out: list = [own]
    out += [Parameter(j, IntegerStamp.full(w)) for j in range(metas) if j != k]
    out += [Parameter(k, s) for s in _narrow(w)]
    out += [Parameter(k, IntegerStamp.full(alt)), Parameter(k, BOOL_STAMP)]
    out += [Constant(IntVal.of(w, x)) for x in _corners(w)]
    if depth >= 2:
        out += [Unary(UnaryOp.Neg, own), Unary(UnaryOp.Not, own)]
        out += [Binary(op, own, other) for op in (BinaryOp.Add, BinaryOp.Sub, BinaryOp.Mul, BinaryOp.And, BinaryOp.Xor)]
        out += [
            Binary(BinaryOp.Sub, own, Constant(IntVal.of(w, 1))),
            Binary(BinaryOp.RightShiftUnsigned, own, Constant(IntVal(w, min(1, w - 1)))),
            Binary(BinaryOp.IntegerLessThan, own, other),
            Binary(BinaryOp.IntegerEquals, own, other),
        ]
    return list(dict.fromkeys(out))


def _linked_pairs(cond) -> list[tuple[str, str]]:
    """Variable pairs related by a stamp or width atom of the condition."""
    match cond:
        case StampUnder(a, b) | WidthEq(a, b):
            return [(a, b)]
        case CondAnd(a, b) | CondOr(a, b):
            return list(dict.fromkeys(_linked_pairs(a) + _linked_pairs(b)))
        case CondNot(a):
            return _linked_pairs(a)
    return []


def instantiations(rule: RewriteRule, cfg: CheckConfig) -> Iterator[Substitution]:
    """Deterministic stream of metavariable instantiations, without repeats."""
    kinds = pattern_vars(rule.lhs)
    metas = [n for n, k in kinds.items() if k is MetaVar]
    consts = [n for n, k in kinds.items() if k is ConstVar]
    rng = np.random.default_rng([cfg.rng_seed, 0x5EED])
    seen = set()

    def emit(base: dict, w: int) -> Iterator[Substitution]:
        combos = itertools.product(*[_corners(w) for _ in consts])
        for combo in combos:
            s = dict(base)
            s.update({c: Constant(IntVal.of(w, x)) for c, x in zip(consts, combo)})
            key = tuple(sorted(s.items(), key=lambda kv: kv[0]))
            if key not in seen:
                seen.add(key)
                yield s

    for w in sorted(cfg.exhaustive_widths | cfg.sample_widths):
        pools = {n: _candidates(i, len(metas), w, cfg.max_instantiation_depth) for i, n in enumerate(metas)}
        base = {n: pools[n][0] for n in metas}
        yield from emit(base, w)
        for n in metas:
            for cand in pools[n][1:]:
                yield from emit({**base, n: cand}, w)
        for a, b in _linked_pairs(rule.cond):
            if a in pools and b in pools:
                sa = [Parameter(metas.index(a), s) for s in _narrow(w)] + [Constant(IntVal.of(w, x)) for x in _corners(w)]
                sb = [Parameter(metas.index(b), s) for s in _narrow(w)] + [Constant(IntVal.of(w, x)) for x in _corners(w)]
                for ta, tb in itertools.product(sa, sb):
                    yield from emit({**base, a: ta, b: tb}, w)
        for _ in range(cfg.random_instantiations if metas else 0):
            pick = {n: pools[n][int(rng.integers(len(pools[n])))] for n in metas}
            yield from emit(pick, w)


# --- reporting ------------------------------------------------------------


def format_verdict(name: str, v: Verdict) -> str:
    from .syntax import format_expr

    match v:
        case VerifiedBounded(n):
            return f"RULE {name}: PASS({n} contexts)"
        case Inapplicable(reason):
            return f"RULE {name}: INAPPLICABLE {reason}"
        case GraphMismatch(reason, nodes):
            return f"RULE {name}: FAIL {reason} {list(nodes)}"
        case Counterexample():
            inst = ""
            if v.instantiation:
                inst = " with " + ", ".join(f"{k} := {format_expr(t)}" for k, t in v.instantiation.items())
            return (
                f"RULE {name}: FAIL {format_expr(v.lhs)} |-> {format_expr(v.rhs)}{inst}"
                f" in {v.context}: lhs = {v.lhs_result}, rhs = {v.rhs_result}"
            )
    raise TypeError(v)


def verdict_json(v: Verdict) -> dict:
    from .syntax import format_expr

    match v:
        case VerifiedBounded(n):
            return {"status": "PASS", "contexts": n, "bounded": True}
        case Inapplicable(reason):
            return {"status": "INAPPLICABLE", "reason": reason}
        case GraphMismatch(reason, nodes):
            return {"status": "FAIL", "reason": reason, "nodes": list(nodes)}
        case Counterexample():
            return {
                "status": "FAIL",
                "lhs": format_expr(v.lhs),
                "rhs": format_expr(v.rhs),
                "instantiation": {k: format_expr(t) for k, t in (v.instantiation or {}).items()},
                "params": [str(p) for p in v.context.params],
                "method_state": {str(k): str(x) for k, x in sorted(v.context.method_state.items())},
                "lhs_result": str(v.lhs_result),
                "rhs_result": str(v.rhs_result),
                "node": v.node,
            }
    raise TypeError(v)
