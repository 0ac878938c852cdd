import itertools

import pytest
from hypothesis import given
from hypothesis import strategies as st

from termopt.values import (
    BOOL_STAMP,
    FALSE,
    TRUE,
    UNDEF,
    BinaryOp,
    IllegalStamp,
    IntegerStamp,
    IntVal,
    UnaryOp,
    bin_eval,
    constant_as_stamp,
    join_stamps,
    parse_value,
    stamp_under,
    to_signed,
    unary_eval,
    valid_value,
)

# Independent oracle: plain Python integers, no shared helpers.


def signed(bits, w):
    return bits - 2**w if bits >= 2 ** (w - 1) else bits


def oracle(op, w, a, b):
    m = 2**w
    sa, sb = signed(a, w), signed(b, w)
    table = {
        BinaryOp.Add: lambda: (a + b) % m,
        BinaryOp.Sub: lambda: (a - b) % m,
        BinaryOp.Mul: lambda: (a * b) % m,
        BinaryOp.And: lambda: a & b,
        BinaryOp.Or: lambda: a | b,
        BinaryOp.Xor: lambda: a ^ b,
        BinaryOp.IntegerLessThan: lambda: int(sa < sb),
        BinaryOp.IntegerEquals: lambda: int(a == b),
    }
    return table[op]()


def val(w, n):
    return IntVal.of(w, n)


@pytest.mark.parametrize("w", [1, 2, 3, 4, 5])
def test_binary_ops_match_oracle_exhaustively(w):
    ops = [op for op in BinaryOp if not op.is_shift]
    for a, b in itertools.product(range(2**w), repeat=2):
        for op in ops:
            r = bin_eval(op, IntVal(w, a), IntVal(w, b))
            width = 32 if op.is_comparison else w
            assert r == IntVal(width, oracle(op, w, a, b)), (op, w, a, b)


@pytest.mark.parametrize("w", [1, 2, 3, 5])
def test_shifts_match_oracle_exhaustively(w):
    for a in range(2**w):
        for amt in range(2 * w + 2):
            shl = bin_eval(BinaryOp.LeftShift, IntVal(w, a), IntVal(8, amt))
            sar = bin_eval(BinaryOp.RightShiftSigned, IntVal(w, a), IntVal(8, amt))
            shr = bin_eval(BinaryOp.RightShiftUnsigned, IntVal(w, a), IntVal(8, amt))
            if amt >= w:
                assert shl is sar is shr is UNDEF
                continue
            assert shl == IntVal(w, (a * 2**amt) % 2**w)
            assert shr == IntVal(w, a // 2**amt)
            assert sar == IntVal(w, (signed(a, w) // 2**amt) % 2**w)


@pytest.mark.parametrize(
    "op, a, b, expected",
    [
        (BinaryOp.Add, val(8, 100), val(8, 100), val(8, -56)),
        (BinaryOp.Sub, val(8, 0), val(8, 1), val(8, 255)),
        (BinaryOp.Mul, val(16, 300), val(16, 300), val(16, 90000 % 65536)),
        (BinaryOp.IntegerLessThan, val(8, -1), val(8, 0), TRUE),
        (BinaryOp.IntegerLessThan, val(8, 127), val(8, -128), FALSE),
        (BinaryOp.IntegerEquals, val(4, 7), val(4, 7), TRUE),
        (BinaryOp.RightShiftSigned, val(8, -128), val(8, 7), val(8, -1)),
        (BinaryOp.RightShiftUnsigned, val(8, -128), val(8, 7), val(8, 1)),
        (BinaryOp.LeftShift, val(64, 1), val(32, 63), IntVal(64, 2**63)),
        (BinaryOp.LeftShift, val(8, 1), val(8, 8), UNDEF),
        (BinaryOp.Add, val(8, 1), val(16, 1), UNDEF),
        (BinaryOp.IntegerLessThan, val(8, 1), val(16, 1), UNDEF),
        (BinaryOp.Add, UNDEF, val(8, 1), UNDEF),
    ],
)
def test_binary_examples(op, a, b, expected):
    assert bin_eval(op, a, b) == expected


@pytest.mark.parametrize(
    "op, a, expected",
    [
        (UnaryOp.Neg, val(8, 1), val(8, -1)),
        (UnaryOp.Neg, val(8, -128), val(8, -128)),
        (UnaryOp.Abs, val(8, -5), val(8, 5)),
        (UnaryOp.Abs, val(8, -128), val(8, -128)),
        (UnaryOp.Abs, val(1, 1), val(1, 1)),
        (UnaryOp.Not, val(4, 0), val(4, 15)),
        (UnaryOp.LogicNegate, TRUE, FALSE),
        (UnaryOp.LogicNegate, FALSE, TRUE),
        (UnaryOp.LogicNegate, IntVal(32, 2), UNDEF),
        (UnaryOp.LogicNegate, val(8, 1), UNDEF),
        (UnaryOp.Neg, UNDEF, UNDEF),
    ],
)
def test_unary_examples(op, a, expected):
    assert unary_eval(op, a) == expected


def test_int_construction_checks_bits():
    with pytest.raises(ValueError):
        IntVal(8, 256)
    with pytest.raises(ValueError):
        IntVal(0, 0)
    with pytest.raises(ValueError):
        IntVal(65, 0)
    assert IntVal.of(8, -1) == IntVal(8, 255)


def test_value_text_round_trip():
    assert str(IntVal(8, 255)) == "i8 -1"
    assert parse_value("i8 -1") == IntVal(8, 255)
    assert parse_value("i8 255") == IntVal(8, 255)
    with pytest.raises(ValueError):
        parse_value("i8 256")
    with pytest.raises(ValueError):
        parse_value("8 1")


def test_stamps():
    s = IntegerStamp(8, 0, 5)
    assert str(s) == "i8[0,5]"
    assert str(IntegerStamp.full(32)) == "i32"
    assert valid_value(val(8, 3), s)
    assert not valid_value(val(8, 6), s)
    assert not valid_value(val(16, 3), s)
    assert not valid_value(UNDEF, s)
    with pytest.raises(ValueError):
        IntegerStamp(8, 5, 0)
    with pytest.raises(ValueError):
        IntegerStamp(8, 0, 128)


def test_stamp_under():
    assert stamp_under(IntegerStamp(8, 0, 3), IntegerStamp(8, 4, 9))
    assert not stamp_under(IntegerStamp(8, 0, 4), IntegerStamp(8, 4, 9))
    assert not stamp_under(IntegerStamp(8, 0, 3), IntegerStamp(16, 4, 9))
    assert not stamp_under(IllegalStamp(), IntegerStamp(8, 4, 9))


def test_constant_stamp_and_join():
    assert constant_as_stamp(val(8, -3)) == IntegerStamp(8, -3, -3)
    assert constant_as_stamp(UNDEF) == IllegalStamp()
    assert join_stamps(IntegerStamp(8, 0, 1), IntegerStamp(8, -4, 0)) == IntegerStamp(8, -4, 1)
    assert join_stamps(IntegerStamp(8, 0, 1), IntegerStamp(4, 0, 1)) == IllegalStamp()
    assert BOOL_STAMP == IntegerStamp(32, 0, 1)


widths = st.integers(1, 64)


@st.composite
def int_vals(draw, w=None):
    w = w or draw(widths)
    return IntVal(w, draw(st.integers(0, 2**w - 1)))


@st.composite
def same_width_pairs(draw):
    w = draw(widths)
    return draw(int_vals(w)), draw(int_vals(w))


@given(same_width_pairs(), st.sampled_from(list(BinaryOp)))
def test_results_stay_in_range(pair, op):
    r = bin_eval(op, *pair)
    if r is not UNDEF:
        assert 0 <= r.bits < 2**r.width


@given(same_width_pairs())
def test_arithmetic_laws(pair):
    a, b = pair
    assert bin_eval(BinaryOp.Add, a, b) == bin_eval(BinaryOp.Add, b, a)
    assert bin_eval(BinaryOp.Sub, bin_eval(BinaryOp.Add, a, b), b) == a
    assert bin_eval(BinaryOp.Add, a, unary_eval(UnaryOp.Neg, a)) == IntVal(a.width, 0)
    assert unary_eval(UnaryOp.Not, unary_eval(UnaryOp.Not, a)) == a


@given(int_vals())
def test_signed_reading_round_trips(v):
    assert IntVal.of(v.width, v.signed) == v
    assert to_signed(v.bits, v.width) == signed(v.bits, v.width)
    assert parse_value(str(v)) == v


@given(int_vals())
def test_constant_stamp_admits_its_value(v):
    assert valid_value(v, constant_as_stamp(v))
