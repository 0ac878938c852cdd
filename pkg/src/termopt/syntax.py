"""Concrete syntax for expressions, patterns, conditions and rule files.

Expressions use Java-like infix notation with Java precedence::

    c ? t : f          (lowest, right associative)
    |   ^   &   ==   <   << >> >>>   + -   *
    - ~ ! abs(e)       (prefix)

Atoms are ``p<i>:<stamp>`` parameters, ``leaf <id>:<stamp>`` leaves,
``const i<w> <n>`` constants, ``true``/``false`` (``const i32 1``/``0``),
and, in patterns, metavariables ``x``, constant metavariables ``const c``
and ``zero_like(x)``.  A stamp is ``i<w>`` (full signed range) or
``i<w>[lo,hi]``.

A rule file is a sequence of phases::

    phase Name [measure trm] {
        [unchecked] RuleName: lhs |-> rhs [when cond];
    }

Conditions combine ``IsConstant(v)``, ``StampUnder(u, v)``,
``WidthEq(u, v)``, ``v == const i<w> n`` and ``true`` with ``&& || !``.
``//`` starts a comment.
"""

from __future__ import annotations

import re
import warnings
from dataclasses import dataclass

from .rules import (
    CondAnd,
    CondNot,
    CondOr,
    CondTrue,
    ConstEq,
    ConstVar,
    IsConstant,
    MetaVar,
    Phase,
    RewriteRule,
    RuleError,
    StampUnder,
    WidthEq,
    ZeroLike,
    is_ground,
)
from .terms import Binary, Conditional, Constant, Leaf, Parameter, Unary
from .values import FALSE, TRUE, BinaryOp, IntegerStamp, IntVal, UnaryOp, mask, smin


class ParseError(ValueError):
    def __init__(self, message: str, line: int, col: int):
        super().__init__(f"line {line}, col {col}: {message}")
        self.message = message
        self.line = line
        self.col = col


class DuplicateRuleName(UserWarning):
    pass


@dataclass(frozen=True, slots=True)
class Token:
    kind: str  # "num", "id", "op" or "eof"
    text: str
    line: int
    col: int


_TOKEN_RE = re.compile(
    r"(?P<ws>[ \t\r\n]+)"
    r"|(?P<comment>//[^\n]*)"
    r"|(?P<num>\d+)"
    r"|(?P<id>[A-Za-z_][A-Za-z0-9_]*)"
    r"|(?P<op>\|->|>>>|<<|>>|==|&&|\|\||[-+*&|^<~!?:(){}\[\],;])"
)

_TYPE_RE = re.compile(r"i(\d+)$")
_PARAM_RE = re.compile(r"p(\d+)$")


def tokenize(text: str) -> list[Token]:
    tokens = []
    pos, line, line_start = 0, 1, 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise ParseError(f"unexpected character {text[pos]!r}", line, pos - line_start + 1)
        kind = m.lastgroup
        if kind in ("num", "id", "op"):
            tokens.append(Token(kind, m.group(), line, pos - line_start + 1))
        newlines = m.group().count("\n")
        if newlines:
            line += newlines
            line_start = m.start() + m.group().rindex("\n") + 1
        pos = m.end()
    tokens.append(Token("eof", "", line, pos - line_start + 1))
    return tokens


_BINARY_LEVELS: list[dict[str, BinaryOp]] = [
    {"|": BinaryOp.Or},
    {"^": BinaryOp.Xor},
    {"&": BinaryOp.And},
    {"==": BinaryOp.IntegerEquals},
    {"<": BinaryOp.IntegerLessThan},
    {"<<": BinaryOp.LeftShift, ">>": BinaryOp.RightShiftSigned, ">>>": BinaryOp.RightShiftUnsigned},
    {"+": BinaryOp.Add, "-": BinaryOp.Sub},
    {"*": BinaryOp.Mul},
]

_PREFIX = {"-": UnaryOp.Neg, "~": UnaryOp.Not, "!": UnaryOp.LogicNegate}

_RESERVED = {"const", "leaf", "true", "false", "zero_like", "abs", "when", "phase", "measure", "unchecked"}


class Parser:
    def __init__(self, text: str):
        self.tokens = tokenize(text)
        self.i = 0

    # token helpers

    @property
    def tok(self) -> Token:
        return self.tokens[self.i]

    def peek(self, k: int = 1) -> Token:
        return self.tokens[min(self.i + k, len(self.tokens) - 1)]

    def error(self, message: str, tok: Token | None = None) -> ParseError:
        tok = tok or self.tok
        return ParseError(message, tok.line, tok.col)

    def at(self, text: str) -> bool:
        return self.tok.kind in ("op", "id") and self.tok.text == text

    def accept(self, text: str) -> bool:
        if self.at(text):
            self.i += 1
            return True
        return False

    def expect(self, text: str) -> Token:
        if not self.at(text):
            found = self.tok.text or "end of input"
            raise self.error(f"expected {text!r}, found {found!r}")
        t = self.tok
        self.i += 1
        return t

    def ident(self) -> str:
        if self.tok.kind != "id":
            raise self.error(f"expected an identifier, found {self.tok.text or 'end of input'!r}")
        t = self.tok.text
        self.i += 1
        return t

    def number(self) -> int:
        neg = self.accept("-")
        if self.tok.kind != "num":
            raise self.error("expected a number")
        n = int(self.tok.text)
        self.i += 1
        return -n if neg else n

    def expect_eof(self):
        if self.tok.kind != "eof":
            raise self.error(f"unexpected {self.tok.text!r}")

    # expressions

    def expr(self):
        c = self.binary(0)
        if self.accept("?"):
            t = self.expr()
            self.expect(":")
            f = self.expr()
            return Conditional(c, t, f)
        return c

    def binary(self, level: int):
        if level == len(_BINARY_LEVELS):
            return self.unary()
        ops = _BINARY_LEVELS[level]
        left = self.binary(level + 1)
        while self.tok.kind == "op" and self.tok.text in ops:
            op = ops[self.tok.text]
            self.i += 1
            left = Binary(op, left, self.binary(level + 1))
        return left

    def unary(self):
        if self.tok.kind == "op" and self.tok.text in _PREFIX:
            op = _PREFIX[self.tok.text]
            self.i += 1
            return Unary(op, self.unary())
        if self.at("abs") and self.peek().text == "(":
            self.i += 2
            e = self.expr()
            self.expect(")")
            return Unary(UnaryOp.Abs, e)
        return self.primary()

    def stamp(self) -> IntegerStamp:
        tok = self.tok
        m = _TYPE_RE.match(tok.text) if tok.kind == "id" else None
        if m is None:
            raise self.error("expected a stamp such as i32 or i8[0,5]")
        self.i += 1
        width = int(m.group(1))
        try:
            if self.accept("["):
                lo = self.number()
                self.expect(",")
                hi = self.number()
                self.expect("]")
                return IntegerStamp(width, lo, hi)
            return IntegerStamp.full(width)
        except ValueError as exc:
            raise self.error(str(exc), tok) from None

    def _literal_follows(self) -> bool:
        if self.tok.kind != "id" or not _TYPE_RE.match(self.tok.text):
            return False
        nxt = self.peek()
        return nxt.kind == "num" or (nxt.text == "-" and self.peek(2).kind == "num")

    def primary(self):
        tok = self.tok
        if self.accept("("):
            e = self.expr()
            self.expect(")")
            return e
        if self.accept("const"):
            if self._literal_follows():
                width = int(_TYPE_RE.match(self.ident()).group(1))
                n = self.number()
                if not 1 <= width <= 64 or not smin(width) <= n <= mask(width):
                    raise self.error(f"{n} is not an i{width} literal", tok)
                return Constant(IntVal.of(width, n))
            return ConstVar(self.ident())
        if self.accept("true"):
            return Constant(TRUE)
        if self.accept("false"):
            return Constant(FALSE)
        if self.accept("leaf"):
            if self.tok.kind != "num":
                raise self.error("expected a node id after 'leaf'")
            nid = int(self.tok.text)
            self.i += 1
            self.expect(":")
            return Leaf(nid, self.stamp())
        if self.accept("zero_like"):
            self.expect("(")
            name = self.ident()
            self.expect(")")
            return ZeroLike(name)
        if tok.kind == "id":
            if tok.text in _RESERVED:
                raise self.error(f"unexpected keyword {tok.text!r}")
            self.i += 1
            m = _PARAM_RE.match(tok.text)
            if m and self.accept(":"):
                return Parameter(int(m.group(1)), self.stamp())
            return MetaVar(tok.text)
        raise self.error(f"unexpected {tok.text or 'end of input'!r}")

    # conditions

    def condition(self):
        c = self.cond_and()
        while self.accept("||"):
            c = CondOr(c, self.cond_and())
        return c

    def cond_and(self):
        c = self.cond_not()
        while self.accept("&&"):
            c = CondAnd(c, self.cond_not())
        return c

    def cond_not(self):
        if self.accept("!"):
            return CondNot(self.cond_not())
        return self.cond_atom()

    def cond_atom(self):
        if self.accept("("):
            c = self.condition()
            self.expect(")")
            return c
        if self.accept("true"):
            return CondTrue()
        name = self.ident()
        if name == "IsConstant":
            self.expect("(")
            v = self.ident()
            self.expect(")")
            return IsConstant(v)
        if name in ("StampUnder", "WidthEq"):
            self.expect("(")
            a = self.ident()
            self.expect(",")
            b = self.ident()
            self.expect(")")
            return StampUnder(a, b) if name == "StampUnder" else WidthEq(a, b)
        self.expect("==")
        self.expect("const")
        lit = self.primary_literal()
        return ConstEq(name, lit)

    def primary_literal(self) -> IntVal:
        tok = self.tok
        if not self._literal_follows():
            raise self.error("expected a typed literal such as i32 0")
        width = int(_TYPE_RE.match(self.ident()).group(1))
        n = self.number()
        if not 1 <= width <= 64 or not smin(width) <= n <= mask(width):
            raise self.error(f"{n} is not an i{width} literal", tok)
        return IntVal.of(width, n)

    # rules

    def rule_body(self, name: str, name_tok: Token, unchecked: bool = False) -> RewriteRule:
        lhs = self.expr()
        self.expect("|->")
        rhs = self.expr()
        cond = self.condition() if self.accept("when") else CondTrue()
        try:
            return RewriteRule(name, lhs, rhs, cond, unchecked)
        except RuleError as exc:
            raise self.error(str(exc), name_tok) from None

    def rule(self) -> RewriteRule:
        unchecked = self.accept("unchecked")
        name_tok = self.tok
        name = self.ident()
        self.expect(":")
        r = self.rule_body(name, name_tok, unchecked)
        self.expect(";")
        return r

    def phase(self) -> Phase:
        self.expect("phase")
        name = self.ident()
        measure = self.ident() if self.accept("measure") else "trm"
        self.expect("{")
        rules: list[RewriteRule] = []
        seen: dict[str, int] = {}
        while not self.accept("}"):
            if self.tok.kind == "eof":
                raise self.error(f"unterminated phase {name}")
            tok = self.tok
            r = self.rule()
            if r.name in seen:
                seen[r.name] += 1
                new = f"{r.name}_{seen[r.name]}"
                warnings.warn(
                    f"line {tok.line}: duplicate rule name {r.name} in phase {name}, renamed to {new}",
                    DuplicateRuleName,
                    stacklevel=3,
                )
                r = RewriteRule(new, r.lhs, r.rhs, r.cond, r.unchecked)
            else:
                seen[r.name] = 1
            rules.append(r)
        try:
            return Phase(name, tuple(rules), measure)
        except ValueError as exc:
            raise self.error(str(exc)) from None


def parse_pattern(text: str):
    p = Parser(text)
    e = p.expr()
    p.expect_eof()
    return e


def parse_expr(text: str):
    """Parse a ground term (no metavariables)."""
    e = parse_pattern(text)
    if not is_ground(e):
        raise ParseError("metavariables are not allowed in a ground expression", 1, 1)
    return e


def parse_condition(text: str):
    p = Parser(text)
    c = p.condition()
    p.expect_eof()
    return c


def parse_rule(text: str) -> RewriteRule:
    """Parse ``[unchecked] Name: lhs |-> rhs [when cond]`` with an optional trailing ``;``."""
    p = Parser(text)
    unchecked = p.accept("unchecked")
    r = p.rule_body(*_name_prefix(p), unchecked)
    p.accept(";")
    p.expect_eof()
    return r


def _name_prefix(p: Parser) -> tuple[str, Token]:
    tok = p.tok
    name = p.ident()
    p.expect(":")
    return name, tok


def parse_rules(text: str) -> list[Phase]:
    p = Parser(text)
    phases = []
    while p.tok.kind != "eof":
        phases.append(p.phase())
    return phases


# --- printing -------------------------------------------------------------

_UNARY_TEXT = {UnaryOp.Neg: "-", UnaryOp.Not: "~", UnaryOp.LogicNegate: "!"}


def _operand(e) -> str:
    s = format_expr(e)
    return f"({s})" if isinstance(e, (Binary, Conditional)) else s


def format_expr(e) -> str:
    match e:
        case Constant(v):
            return f"const {v}"
        case Parameter(i, s):
            return f"p{i}:{s}"
        case Leaf(n, s):
            return f"leaf {n}:{s}"
        case MetaVar(n):
            return n
        case ConstVar(n):
            return f"const {n}"
        case ZeroLike(n):
            return f"zero_like({n})"
        case Unary(UnaryOp.Abs, a):
            return f"abs({format_expr(a)})"
        case Unary(op, a):
            return _UNARY_TEXT[op] + _operand(a)
        case Binary(op, a, b):
            return f"{_operand(a)} {op.value} {_operand(b)}"
        case Conditional(c, t, f):
            return f"{_operand(c)} ? {_operand(t)} : {_operand(f)}"
    raise TypeError(f"cannot format {e!r}")


def format_condition(c, top: bool = True) -> str:
    match c:
        case CondTrue():
            return "true"
        case IsConstant(v):
            return f"IsConstant({v})"
        case StampUnder(a, b):
            return f"StampUnder({a}, {b})"
        case WidthEq(a, b):
            return f"WidthEq({a}, {b})"
        case ConstEq(v, value):
            return f"{v} == const {value}"
        case CondNot(a):
            return "!" + format_condition(a, False)
        case CondAnd(a, b):
            s = f"{format_condition(a, False)} && {format_condition(b, False)}"
            return s if top else f"({s})"
        case CondOr(a, b):
            s = f"{format_condition(a, False)} || {format_condition(b, False)}"
            return s if top else f"({s})"
    raise TypeError(f"cannot format {c!r}")


def format_rule(r: RewriteRule) -> str:
    s = f"{r.name}: {format_expr(r.lhs)} |-> {format_expr(r.rhs)}"
    if not isinstance(r.cond, CondTrue):
        s += f" when {format_condition(r.cond)}"
    return ("unchecked " if r.unchecked else "") + s + ";"


def format_phase(ph: Phase) -> str:
    head = f"phase {ph.name}" + (f" measure {ph.measure}" if ph.measure != "trm" else "")
    body = "".join(f"    {format_rule(r)}\n" for r in ph.rules)
    return f"{head} {{\n{body}}}\n"
