"""Shipped rule set and the worked example graphs, at any bit width."""

from __future__ import annotations

from importlib import resources

from .graph import BinaryNode, IRGraph, ParameterNode
from .rules import Phase
from .syntax import parse_expr, parse_rules
from .values import BinaryOp, IntegerStamp


def shipped_rules_text() -> str:
    return resources.files("termopt").joinpath("data/paper.rules").read_text(encoding="utf-8")


def shipped_phases() -> list[Phase]:
    return parse_rules(shipped_rules_text())


def data_text(name: str) -> str:
    return resources.files("termopt").joinpath("data", name).read_text(encoding="utf-8")


def shared_square(width: int = 32) -> IRGraph:
    """``(x*x) + (x*x)`` with full sharing: 1=Add(2,2), 2=Mul(3,3), 3=x."""
    s = IntegerStamp.full(width)
    return IRGraph.of(
        {
            1: (BinaryNode(BinaryOp.Add, 2, 2), s),
            2: (BinaryNode(BinaryOp.Mul, 3, 3), s),
            3: (ParameterNode(0), s),
        }
    )


def subtract_chain(width: int = 32) -> IRGraph:
    """``((x-y)+y) - (x-y)``: 1=Sub(2,3), 2=Add(3,5), 3=Sub(4,5), 4=x, 5=y."""
    s = IntegerStamp.full(width)
    return IRGraph.of(
        {
            1: (BinaryNode(BinaryOp.Sub, 2, 3), s),
            2: (BinaryNode(BinaryOp.Add, 3, 5), s),
            3: (BinaryNode(BinaryOp.Sub, 4, 5), s),
            4: (ParameterNode(0), s),
            5: (ParameterNode(1), s),
        }
    )


def subtract_chain_term(width: int = 32):
    x, y = f"p0:i{width}", f"p1:i{width}"
    return parse_expr(f"(({x} - {y}) + {y}) - ({x} - {y})")
