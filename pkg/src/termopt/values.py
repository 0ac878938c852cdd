"""Fixed-width integer values, stamps and the operator evaluation functions.

An integer value is a 64-bit word tagged with a bit width; only the low
``width`` bits may be set.  Operators that receive ill-typed inputs return
:data:`UNDEF` instead of raising.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

MAX_WIDTH = 64
WORD_MASK = (1 << MAX_WIDTH) - 1


def mask(width: int) -> int:
    return (1 << width) - 1


def smin(width: int) -> int:
    return -(1 << (width - 1))


def smax(width: int) -> int:
    return (1 << (width - 1)) - 1


def to_signed(bits: int, width: int) -> int:
    """Two's-complement reading of the low ``width`` bits."""
    if bits >> (width - 1) & 1:
        return bits - (1 << width)
    return bits


class Undef:
    """The error value produced by ill-typed operator applications."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "UNDEF"

    def __str__(self):
        return "undef"

    def __reduce__(self):
        return (Undef, ())


UNDEF = Undef()


@dataclass(frozen=True, slots=True)
class IntVal:
    width: int
    bits: int

    def __post_init__(self):
        if not 1 <= self.width <= MAX_WIDTH:
            raise ValueError(f"width {self.width} outside 1..{MAX_WIDTH}")
        if not 0 <= self.bits <= mask(self.width):
            raise ValueError(f"bits {self.bits:#x} do not fit in {self.width} bits")

    @classmethod
    def of(cls, width: int, n: int) -> IntVal:
        """Build from any Python int, reducing modulo ``2**width``."""
        return cls(width, n & mask(width))

    @property
    def signed(self) -> int:
        return to_signed(self.bits, self.width)

    def __str__(self):
        return f"i{self.width} {self.signed}"


Value = IntVal | Undef


def parse_value(text: str) -> IntVal:
    """Inverse of ``str(IntVal)``: ``"i8 -1"`` -> ``IntVal(8, 255)``."""
    ty, _, num = text.strip().partition(" ")
    if not ty.startswith("i") or not num:
        raise ValueError(f"bad value literal {text!r}")
    width, n = int(ty[1:]), int(num)
    if not smin(width) <= n <= mask(width):
        raise ValueError(f"{n} does not fit in i{width}")
    return IntVal.of(width, n)


# --- stamps ---------------------------------------------------------------


@dataclass(frozen=True, slots=True)
class IntegerStamp:
    width: int
    lo: int
    hi: int

    def __post_init__(self):
        if not 1 <= self.width <= MAX_WIDTH:
            raise ValueError(f"stamp width {self.width} outside 1..{MAX_WIDTH}")
        if not smin(self.width) <= self.lo <= self.hi <= smax(self.width):
            raise ValueError(f"bad bounds [{self.lo}, {self.hi}] for i{self.width}")

    @classmethod
    def full(cls, width: int) -> IntegerStamp:
        return cls(width, smin(width), smax(width))

    @property
    def is_full(self) -> bool:
        return self.lo == smin(self.width) and self.hi == smax(self.width)

    def __str__(self):
        if self.is_full:
            return f"i{self.width}"
        return f"i{self.width}[{self.lo},{self.hi}]"


@dataclass(frozen=True, slots=True)
class VoidStamp:
    def __str__(self):
        return "void"


@dataclass(frozen=True, slots=True)
class IllegalStamp:
    def __str__(self):
        return "illegal"


Stamp = IntegerStamp | VoidStamp | IllegalStamp

BOOL_STAMP = IntegerStamp(32, 0, 1)


def valid_value(v: Value, s: Stamp) -> bool:
    """``v`` is an integer of the stamp's width whose signed value is in bounds."""
    if not isinstance(v, IntVal) or not isinstance(s, IntegerStamp):
        return False
    return v.width == s.width and s.lo <= v.signed <= s.hi


def stamp_under(s1: Stamp, s2: Stamp) -> bool:
    """Every value admitted by ``s1`` is strictly below every value of ``s2``."""
    return (
        isinstance(s1, IntegerStamp)
        and isinstance(s2, IntegerStamp)
        and s1.width == s2.width
        and s1.hi < s2.lo
    )


def constant_as_stamp(v: Value) -> Stamp:
    if not isinstance(v, IntVal):
        return IllegalStamp()
    x = v.signed
    return IntegerStamp(v.width, x, x)


def join_stamps(s1: Stamp, s2: Stamp) -> Stamp:
    if isinstance(s1, IntegerStamp) and isinstance(s2, IntegerStamp) and s1.width == s2.width:
        return IntegerStamp(s1.width, min(s1.lo, s2.lo), max(s1.hi, s2.hi))
    return IllegalStamp()


# --- operators ------------------------------------------------------------


class UnaryOp(enum.Enum):
    Neg = "-"
    Abs = "abs"
    Not = "~"
    LogicNegate = "!"


class BinaryOp(enum.Enum):
    Add = "+"
    Sub = "-"
    Mul = "*"
    And = "&"
    Or = "|"
    Xor = "^"
    LeftShift = "<<"
    RightShiftSigned = ">>"
    RightShiftUnsigned = ">>>"
    IntegerLessThan = "<"
    IntegerEquals = "=="

    @property
    def is_shift(self) -> bool:
        return self in SHIFT_OPS

    @property
    def is_comparison(self) -> bool:
        return self in COMPARISON_OPS


SHIFT_OPS = frozenset({BinaryOp.LeftShift, BinaryOp.RightShiftSigned, BinaryOp.RightShiftUnsigned})
COMPARISON_OPS = frozenset({BinaryOp.IntegerLessThan, BinaryOp.IntegerEquals})

TRUE = IntVal(32, 1)
FALSE = IntVal(32, 0)


def unary_eval(op: UnaryOp, v: Value) -> Value:
    if not isinstance(v, IntVal):
        return UNDEF
    w, x = v.width, v.bits
    match op:
        case UnaryOp.Neg:
            return IntVal(w, -x & mask(w))
        case UnaryOp.Abs:
            # abs(MIN) wraps back to MIN
            return IntVal(w, abs(to_signed(x, w)) & mask(w))
        case UnaryOp.Not:
            return IntVal(w, ~x & mask(w))
        case UnaryOp.LogicNegate:
            if w != 32 or x > 1:
                return UNDEF
            return IntVal(32, x ^ 1)
    raise AssertionError(op)


def bin_eval(op: BinaryOp, v1: Value, v2: Value) -> Value:
    if not isinstance(v1, IntVal) or not isinstance(v2, IntVal):
        return UNDEF
    w, x, y = v1.width, v1.bits, v2.bits
    if op in SHIFT_OPS:
        if y >= w:
            return UNDEF
        match op:
            case BinaryOp.LeftShift:
                return IntVal(w, (x << y) & mask(w))
            case BinaryOp.RightShiftSigned:
                return IntVal(w, (to_signed(x, w) >> y) & mask(w))
            case BinaryOp.RightShiftUnsigned:
                return IntVal(w, x >> y)
    if v2.width != w:
        return UNDEF
    match op:
        case BinaryOp.Add:
            return IntVal(w, (x + y) & mask(w))
        case BinaryOp.Sub:
            return IntVal(w, (x - y) & mask(w))
        case BinaryOp.Mul:
            return IntVal(w, (x * y) & mask(w))
        case BinaryOp.And:
            return IntVal(w, x & y)
        case BinaryOp.Or:
            return IntVal(w, x | y)
        case BinaryOp.Xor:
            return IntVal(w, x ^ y)
        case BinaryOp.IntegerLessThan:
            return TRUE if to_signed(x, w) < to_signed(y, w) else FALSE
        case BinaryOp.IntegerEquals:
            return TRUE if x == y else FALSE
    raise AssertionError(op)
