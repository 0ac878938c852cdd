"""Conditional rewrite rules over terms, the size measure and phases."""

from __future__ import annotations

import itertools
from collections.abc import Iterable, Mapping
from dataclasses import dataclass, field
from functools import cached_property

from .terms import (
    Binary,
    Conditional,
    Constant,
    IRExpr,
    Leaf,
    Parameter,
    Unary,
    children,
    infer_stamp,
    subterms,
    with_children,
)
from .values import IntegerStamp, IntVal, stamp_under

# --- pattern-only nodes ---------------------------------------------------


@dataclass(frozen=True, slots=True)
class MetaVar:
    """Matches any sub-term; repeated names must bind identical sub-terms."""

    name: str


@dataclass(frozen=True, slots=True)
class ConstVar:
    """Matches only constant terms (``const c``)."""

    name: str


@dataclass(frozen=True, slots=True)
class ZeroLike:
    """Right-hand-side only: a zero constant with the width of ``name``'s binding."""

    name: str


Substitution = dict[str, IRExpr]


def pattern_vars(p) -> dict[str, type]:
    """Variable name -> MetaVar or ConstVar for every variable in ``p``."""
    out: dict[str, type] = {}
    for t in subterms(p):
        if isinstance(t, (MetaVar, ConstVar)):
            prev = out.setdefault(t.name, type(t))
            if prev is not type(t):
                raise RuleError(f"variable {t.name!r} is used both as a term and as 'const'")
        elif isinstance(t, ZeroLike):
            out.setdefault(t.name, MetaVar)
    return out


def is_ground(e) -> bool:
    return not any(isinstance(t, (MetaVar, ConstVar, ZeroLike)) for t in subterms(e))


# --- conditions -----------------------------------------------------------


@dataclass(frozen=True, slots=True)
class CondTrue:
    pass


@dataclass(frozen=True, slots=True)
class IsConstant:
    var: str


@dataclass(frozen=True, slots=True)
class StampUnder:
    lower: str
    upper: str


@dataclass(frozen=True, slots=True)
class WidthEq:
    a: str
    b: str


@dataclass(frozen=True, slots=True)
class ConstEq:
    var: str
    value: IntVal


@dataclass(frozen=True, slots=True)
class CondAnd:
    a: Condition
    b: Condition


@dataclass(frozen=True, slots=True)
class CondOr:
    a: Condition
    b: Condition


@dataclass(frozen=True, slots=True)
class CondNot:
    a: Condition


Condition = CondTrue | IsConstant | StampUnder | WidthEq | ConstEq | CondAnd | CondOr | CondNot


def condition_vars(c: Condition) -> set[str]:
    match c:
        case IsConstant(v) | ConstEq(v, _):
            return {v}
        case StampUnder(a, b) | WidthEq(a, b):
            return {a, b}
        case CondAnd(a, b) | CondOr(a, b):
            return condition_vars(a) | condition_vars(b)
        case CondNot(a):
            return condition_vars(a)
    return set()


def eval_condition(cond: Condition, s: Mapping[str, IRExpr]) -> bool:
    match cond:
        case CondTrue():
            return True
        case IsConstant(v):
            return isinstance(s[v], Constant)
        case StampUnder(a, b):
            return stamp_under(infer_stamp(s[a]), infer_stamp(s[b]))
        case WidthEq(a, b):
            sa, sb = infer_stamp(s[a]), infer_stamp(s[b])
            return (
                isinstance(sa, IntegerStamp)
                and isinstance(sb, IntegerStamp)
                and sa.width == sb.width
            )
        case ConstEq(v, value):
            t = s[v]
            return isinstance(t, Constant) and t.value == value
        case CondAnd(a, b):
            return eval_condition(a, s) and eval_condition(b, s)
        case CondOr(a, b):
            return eval_condition(a, s) or eval_condition(b, s)
        case CondNot(a):
            return not eval_condition(a, s)
    raise TypeError(f"not a condition: {cond!r}")


# --- rules ----------------------------------------------------------------


class RuleError(Exception):
    """A rule violates its structural invariants."""


class InstantiationError(RuleError):
    """A right-hand side cannot be built for this particular match."""


@dataclass(frozen=True)
class RewriteRule:
    name: str
    lhs: object
    rhs: object
    cond: Condition = field(default_factory=CondTrue)
    unchecked: bool = False

    def __post_init__(self):
        if any(isinstance(t, ZeroLike) for t in subterms(self.lhs)):
            raise RuleError(f"{self.name}: zero_like may only appear on the right-hand side")
        lv = pattern_vars(self.lhs)
        rv = pattern_vars(self.rhs)
        unbound = (set(rv) - set(lv)) | (condition_vars(self.cond) - set(lv))
        if unbound:
            raise RuleError(f"{self.name}: unbound variable(s) {', '.join(sorted(unbound))}")
        for name, kind in rv.items():
            if kind is ConstVar and lv[name] is not ConstVar:
                raise RuleError(f"{self.name}: {name!r} is 'const' on the right only")

    @cached_property
    def variables(self) -> dict[str, type]:
        return pattern_vars(self.lhs)


def match(pattern, term: IRExpr) -> Substitution | None:
    s: Substitution = {}
    return s if _match(pattern, term, s) else None


def _match(p, t, s: Substitution) -> bool:
    match p:
        case MetaVar(n):
            if n in s:
                return s[n] == t
            s[n] = t
            return True
        case ConstVar(n):
            if not isinstance(t, Constant):
                return False
            if n in s:
                return s[n] == t
            s[n] = t
            return True
        case Unary(op, a):
            return isinstance(t, Unary) and t.op is op and _match(a, t.arg, s)
        case Binary(op, a, b):
            return (
                isinstance(t, Binary)
                and t.op is op
                and _match(a, t.left, s)
                and _match(b, t.right, s)
            )
        case Conditional(c, x, y):
            return (
                isinstance(t, Conditional)
                and _match(c, t.cond, s)
                and _match(x, t.true_branch, s)
                and _match(y, t.false_branch, s)
            )
        case Constant() | Parameter() | Leaf():
            return p == t
    raise RuleError(f"cannot match with {p!r}")


def substitute(template, s: Mapping[str, IRExpr]) -> IRExpr:
    match template:
        case MetaVar(n) | ConstVar(n):
            if n not in s:
                raise RuleError(f"unbound variable {n!r}")
            return s[n]
        case ZeroLike(n):
            if n not in s:
                raise RuleError(f"unbound variable {n!r}")
            st = infer_stamp(s[n])
            if not isinstance(st, IntegerStamp):
                raise InstantiationError(f"zero_like({n}): binding has stamp {st}")
            return Constant(IntVal(st.width, 0))
    kids = children(template)
    if not kids:
        return template
    return with_children(template, [substitute(k, s) for k in kids])


def apply_rule(rule: RewriteRule, e: IRExpr) -> IRExpr | None:
    s = match(rule.lhs, e)
    if s is None or not eval_condition(rule.cond, s):
        return None
    try:
        return substitute(rule.rhs, s)
    except InstantiationError:
        return None


# --- termination measure --------------------------------------------------


@dataclass(frozen=True)
class LinearForm:
    """``const + sum(coeffs[v] * size(v))`` over non-constant pattern variables."""

    coeffs: Mapping[str, int] = field(default_factory=dict)
    const: int = 0

    def __add__(self, other: LinearForm | int) -> LinearForm:
        if isinstance(other, int):
            return LinearForm(self.coeffs, self.const + other)
        cs = dict(self.coeffs)
        for v, k in other.coeffs.items():
            cs[v] = cs.get(v, 0) + k
        return LinearForm({v: k for v, k in cs.items() if k}, self.const + other.const)

    __radd__ = __add__

    def __neg__(self) -> LinearForm:
        return LinearForm({v: -k for v, k in self.coeffs.items()}, -self.const)

    def __sub__(self, other: LinearForm) -> LinearForm:
        return self + (-other)

    def at(self, sizes: Mapping[str, int]) -> int:
        return self.const + sum(k * sizes[v] for v, k in self.coeffs.items())

    def at_ones(self) -> int:
        return self.const + sum(self.coeffs.values())

    def __str__(self):
        parts = [f"{k}*size({v})" if k != 1 else f"size({v})" for v, k in sorted(self.coeffs.items())]
        parts.append(str(self.const))
        return " + ".join(parts)


def _is_const_like(p, const_vars: frozenset[str]) -> bool:
    match p:
        case Constant() | ConstVar() | ZeroLike():
            return True
        case MetaVar(n):
            return n in const_vars
    return False


def trm_form(p, const_vars: Iterable[str] = ()) -> LinearForm:
    """Symbolic measure; metavariables in ``const_vars`` are taken to be constants."""
    return _trm(p, frozenset(const_vars))


def _trm(p, cv: frozenset[str]) -> LinearForm:
    match p:
        case MetaVar(n) if n not in cv:
            return LinearForm({n: 1})
        case Unary(_, a):
            return _trm(a, cv) + 1
        case Binary(_, a, b):
            return _trm(a, cv) + _trm(b, cv) + (1 if _is_const_like(b, cv) else 2)
        case Conditional(c, t, f):
            return _trm(c, cv) + _trm(t, cv) + _trm(f, cv) + 2
    return LinearForm({}, 1)


def trm(e) -> int | LinearForm:
    """Size measure: ground terms give an int, patterns a linear form."""
    form = _trm(e, frozenset())
    return form if form.coeffs else form.const


MEASURES = {"trm": trm}


@dataclass(frozen=True)
class Decreases:
    cases: int

    def __bool__(self):
        return True


@dataclass(frozen=True)
class MayNotDecrease:
    const_vars: frozenset[str]
    difference: LinearForm

    def __bool__(self):
        return False

    def __str__(self):
        flags = ", ".join(sorted(self.const_vars)) or "none"
        return f"lhs - rhs = {self.difference} (constant variables: {flags})"


TerminationVerdict = Decreases | MayNotDecrease


def _kleene(cond: Condition, cv: frozenset[str], kinds: Mapping[str, type]) -> bool | None:
    """Three-valued condition evaluation when only constant-ness is known."""
    match cond:
        case CondTrue():
            return True
        case IsConstant(v):
            return kinds[v] is ConstVar or v in cv
        case ConstEq(v, _):
            if kinds[v] is MetaVar and v not in cv:
                return False
            return None
        case StampUnder() | WidthEq():
            return None
        case CondNot(a):
            r = _kleene(a, cv, kinds)
            return None if r is None else not r
        case CondAnd(a, b):
            ra, rb = _kleene(a, cv, kinds), _kleene(b, cv, kinds)
            if ra is False or rb is False:
                return False
            return True if ra and rb else None
        case CondOr(a, b):
            ra, rb = _kleene(a, cv, kinds), _kleene(b, cv, kinds)
            if ra or rb:
                return True
            return False if ra is False and rb is False else None
    raise TypeError(f"not a condition: {cond!r}")


def check_termination(rule: RewriteRule, measure: str = "trm") -> TerminationVerdict:
    """Decide ``cond ==> trm(lhs) > trm(rhs)`` by case analysis on constant-ness."""
    if measure not in MEASURES:
        raise ValueError(f"unknown measure {measure!r}")
    kinds = rule.variables
    metas = sorted(n for n, k in kinds.items() if k is MetaVar)
    cases = 0
    for flags in itertools.product((False, True), repeat=len(metas)):
        cv = frozenset(n for n, f in zip(metas, flags) if f)
        if _kleene(rule.cond, cv, kinds) is False:
            continue
        cases += 1
        diff = trm_form(rule.lhs, cv) - trm_form(rule.rhs, cv)
        if any(k < 0 for k in diff.coeffs.values()) or diff.at_ones() <= 0:
            return MayNotDecrease(cv, diff)
    return Decreases(cases)


# --- phases ---------------------------------------------------------------


class NonTerminatingPhase(Exception):
    pass


class RewriteLimitExceeded(Exception):
    pass


@dataclass(frozen=True)
class Phase:
    name: str
    rules: tuple[RewriteRule, ...]
    measure: str = "trm"

    def __post_init__(self):
        object.__setattr__(self, "rules", tuple(self.rules))
        if self.measure not in MEASURES:
            raise ValueError(f"phase {self.name}: unknown measure {self.measure!r}")

    def rule(self, name: str) -> RewriteRule:
        for r in self.rules:
            if r.name == name:
                return r
        raise KeyError(name)

    @cached_property
    def termination(self) -> tuple[tuple[RewriteRule, TerminationVerdict], ...]:
        return tuple((r, check_termination(r, self.measure)) for r in self.rules)

    def ensure_terminating(self) -> None:
        bad = [r.name for r, v in self.termination if not v and not r.unchecked]
        if bad:
            raise NonTerminatingPhase(f"phase {self.name}: measure may not decrease for {', '.join(bad)}")

    @property
    def has_unchecked(self) -> bool:
        return any(r.unchecked for r in self.rules)


def merge_phases(phases: Iterable[Phase], name: str = "All") -> Phase:
    phases = list(phases)
    measures = {p.measure for p in phases}
    if len(measures) > 1:
        raise ValueError("cannot merge phases with different measures")
    return Phase(name, tuple(r for p in phases for r in p.rules), measures.pop() if measures else "trm")


# unchecked rules may cycle; everything else is bounded by the measure
REWRITE_LIMIT = 100_000


def optimize_term(phase: Phase, e: IRExpr) -> IRExpr:
    """Normalise ``e`` bottom-up; a rewritten node is re-normalised in full."""
    phase.ensure_terminating()
    budget = [REWRITE_LIMIT]
    return _optimize(phase.rules, e, budget)


def _optimize(rules: tuple[RewriteRule, ...], e: IRExpr, budget: list[int]) -> IRExpr:
    kids = children(e)
    if kids:
        new = [_optimize(rules, k, budget) for k in kids]
        if any(a is not b for a, b in zip(new, kids)):
            e = with_children(e, new)
    for rule in rules:
        r = apply_rule(rule, e)
        if r is None:
            continue
        if not rule.unchecked:
            assert trm(e) > trm(r), f"{rule.name} did not decrease the measure"
        budget[0] -= 1
        if budget[0] < 0:
            raise RewriteLimitExceeded(f"more than {REWRITE_LIMIT} rewrites")
        return _optimize(rules, r, budget)
    return e
