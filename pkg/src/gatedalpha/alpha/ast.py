"""Expression tree node types for formulaic alphas."""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class Const:
    value: float


@dataclass(frozen=True)
class Field:
    name: str
    window: int = 0  # only adv{n} uses this

    @property
    def label(self) -> str:
        return f"adv{self.window}" if self.name == "adv" else self.name


@dataclass(frozen=True)
class Unary:
    op: str  # "-", "!", log, abs, sign
    operand: "Node"


@dataclass(frozen=True)
class Binary:
    op: str  # + - * / ^ < <= > >= == != && || signedpower min max
    left: "Node"
    right: "Node"


@dataclass(frozen=True)
class CrossSectional:
    op: str  # rank, scale, indneutralize
    operand: "Node"
    param: float | str | None = None  # scale target, or group name


@dataclass(frozen=True)
class TimeSeries:
    op: str
    args: tuple
    window: int


@dataclass(frozen=True)
class Conditional:
    cond: "Node"
    then: "Node"
    other: "Node"


Node = Const | Field | Unary | Binary | CrossSectional | TimeSeries | Conditional


@dataclass(frozen=True)
class AlphaExpr:
    name: str
    ast: Node
    source: str = ""

    def __str__(self) -> str:
        from .parser import to_source

        return f"{self.name}: {to_source(self.ast)}"


def walk(node: Node):
    """Yield every node of the tree, parents before children."""
    yield node
    for child in _children(node):
        yield from walk(child)


def max_lookback(node: Node) -> int:
    """Number of leading dates an expression needs before it can be defined."""
    if isinstance(node, Field):
        return max(node.window - 1, 0)
    if isinstance(node, Const):
        return 0
    if isinstance(node, TimeSeries):
        inner = max(max_lookback(a) for a in node.args)
        extra = node.window if node.op in ("delay", "delta") else node.window - 1
        return inner + extra
    return max((max_lookback(c) for c in _children(node)), default=0)


def _children(node: Node) -> tuple:
    if isinstance(node, Unary):
        return (node.operand,)
    if isinstance(node, Binary):
        return (node.left, node.right)
    if isinstance(node, CrossSectional):
        return (node.operand,)
    if isinstance(node, TimeSeries):
        return node.args
    if isinstance(node, Conditional):
        return (node.cond, node.then, node.other)
    return ()
