"""Lexer and recursive-descent parser for the formulaic alpha language.

Grammar, loosest binding first::

    expr     := or ('?' expr ':' expr)?
    or       := and ('||' and)*
    and      := compare ('&&' compare)*
    compare  := additive (('<' | '<=' | '>' | '>=' | '==' | '!=') additive)*
    additive := term (('+' | '-') term)*
    term     := unary (('*' | '/') unary)*
    unary    := ('-' | '!') unary | power
    power    := primary ('^' unary)?
    primary  := NUMBER | field | call | '(' expr ')'

Function and field names are case-insensitive.  Time-series operators take
their window as a trailing numeric literal; fractional windows are floored.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass

from ..errors import DataError
from .ast import AlphaExpr, Binary, Conditional, Const, CrossSectional, Field, Node, TimeSeries, Unary

PRICE_FIELDS = ("open", "high", "low", "close", "volume", "vwap", "returns", "cap")

POINTWISE = ("log", "abs", "sign")
# name -> number of series arguments before the window
TS_ARITY = {
    "delay": 1,
    "delta": 1,
    "ts_min": 1,
    "ts_max": 1,
    "ts_argmin": 1,
    "ts_argmax": 1,
    "ts_rank": 1,
    "ts_sum": 1,
    "ts_product": 1,
    "ts_stddev": 1,
    "decay_linear": 1,
    "correlation": 2,
    "covariance": 2,
}
ALIASES = {
    "sum": "ts_sum",
    "product": "ts_product",
    "stddev": "ts_stddev",
    "ts_std": "ts_stddev",
    "corr": "correlation",
    "cov": "covariance",
}
CROSS_SECTIONAL = ("rank", "scale", "indneutralize")


class ParseError(DataError):
    """Syntax error with the byte offset of the offending token."""

    def __init__(self, reason: str, offset: int, expected: str | None = None):
        self.reason = reason
        self.offset = offset
        self.expected = expected
        text = f"{reason} at offset {offset}"
        if expected:
            text += f" (expected {expected})"
        super().__init__(text)


class UnknownNameError(ParseError):
    """Reference to a function or field the language does not define."""


@dataclass(frozen=True)
class Token:
    kind: str  # num, name, op, eof
    text: str
    offset: int


_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<name>[A-Za-z_][A-Za-z0-9_.]*)
  | (?P<op>&&|\|\||<=|>=|==|!=|[-+*/^(),?:<>!])
    """,
    re.VERBOSE,
)


def tokenize(source: str) -> list[Token]:
    tokens = []
    pos = 0
    encoded_upto = 0
    byte_pos = 0

    def byte_offset(i: int) -> int:
        nonlocal encoded_upto, byte_pos
        byte_pos += len(source[encoded_upto:i].encode("utf-8"))
        encoded_upto = i
        return byte_pos

    while pos < len(source):
        m = _TOKEN_RE.match(source, pos)
        if m is None:
            raise ParseError(f"unexpected character {source[pos]!r}", byte_offset(pos))
        if m.lastgroup != "ws":
            tokens.append(Token(m.lastgroup, m.group(), byte_offset(pos)))
        pos = m.end()
    tokens.append(Token("eof", "", byte_offset(len(source))))
    return tokens


class _Parser:
    def __init__(self, source: str):
        self.source = source
        self.tokens = tokenize(source)
        self.i = 0

    @property
    def tok(self) -> Token:
        return self.tokens[self.i]

    def advance(self) -> Token:
        t = self.tokens[self.i]
        self.i += 1
        return t

    def accept(self, *ops: str) -> Token | None:
        if self.tok.kind == "op" and self.tok.text in ops:
            return self.advance()
        return None

    def expect(self, op: str) -> Token:
        if self.tok.kind == "op" and self.tok.text == op:
            return self.advance()
        raise self.error(f"'{op}'")

    def error(self, expected: str) -> ParseError:
        found = "end of input" if self.tok.kind == "eof" else repr(self.tok.text)
        return ParseError(f"syntax error: unexpected {found}", self.tok.offset, expected)

    # grammar ---------------------------------------------------------

    def parse(self) -> Node:
        node = self.expr()
        if self.tok.kind != "eof":
            raise self.error("operator or end of input")
        return node

    def expr(self) -> Node:
        cond = self.binary_level(0)
        if self.accept("?"):
            then = self.expr()
            self.expect(":")
            other = self.expr()
            return Conditional(cond, then, other)
        return cond

    _LEVELS = (("||",), ("&&",), ("<", "<=", ">", ">=", "==", "!="), ("+", "-"), ("*", "/"))

    def binary_level(self, level: int) -> Node:
        if level == len(self._LEVELS):
            return self.unary()
        node = self.binary_level(level + 1)
        while True:
            t = self.accept(*self._LEVELS[level])
            if t is None:
                return node
            node = Binary(t.text, node, self.binary_level(level + 1))

    def unary(self) -> Node:
        t = self.accept("-", "!")
        if t is not None:
            return Unary(t.text, self.unary())
        return self.power()

    def power(self) -> Node:
        base = self.primary()
        if self.accept("^"):
            return Binary("^", base, self.unary())
        return base

    def primary(self) -> Node:
        t = self.tok
        if t.kind == "num":
            self.advance()
            return Const(float(t.text))
        if t.kind == "op" and t.text == "(":
            self.advance()
            node = self.expr()
            self.expect(")")
            return node
        if t.kind == "name":
            self.advance()
            if self.tok.kind == "op" and self.tok.text == "(":
                return self.call(t)
            return self.field(t)
        raise self.error("number, name or '('")

    def field(self, t: Token) -> Field:
        name = t.text.lower()
        if name in PRICE_FIELDS:
            return Field(name)
        m = re.fullmatch(r"adv(\d+)", name)
        if m and int(m.group(1)) >= 1:
            return Field("adv", int(m.group(1)))
        raise UnknownNameError(f"unknown field {t.text!r}", t.offset)

    def arguments(self, allow_group: bool = False) -> list[tuple[Token, Node | None]]:
        self.expect("(")
        args = []
        if self.accept(")"):
            return args
        while True:
            start = self.tok
            bare = start.kind == "name" and self.tokens[self.i + 1].text in (",", ")")
            if bare and (allow_group and args or "." in start.text):
                # group identifiers such as IndClass.sector
                self.advance()
                args.append((start, None))
            else:
                args.append((start, self.expr()))
            if self.accept(")"):
                return args
            if not self.accept(","):
                raise self.error("',' or ')'")

    def window(self, tok: Token, node: Node | None) -> int:
        if not isinstance(node, Const):
            raise ParseError("window must be a numeric literal", tok.offset)
        w = math.floor(node.value)
        if w < 1:
            raise ParseError(f"window must be >= 1, got {node.value:g}", tok.offset)
        return int(w)

    def call(self, t: Token) -> Node:
        name = t.text.lower()
        name = ALIASES.get(name, name)
        args = self.arguments(allow_group=name == "indneutralize")

        def need(n: int) -> None:
            if len(args) != n:
                raise ParseError(f"{name}() takes {n} arguments, got {len(args)}", t.offset)
            for tok, node in args:
                if node is None:
                    raise ParseError(f"unexpected group name {tok.text!r}", tok.offset)

        if name in POINTWISE:
            need(1)
            return Unary(name, args[0][1])
        if name == "signedpower":
            need(2)
            return Binary("signedpower", args[0][1], args[1][1])
        if name in ("min", "max"):
            need(2)
            if isinstance(args[1][1], Const):
                return TimeSeries("ts_" + name, (args[0][1],), self.window(*args[1]))
            return Binary(name, args[0][1], args[1][1])
        if name in TS_ARITY:
            need(TS_ARITY[name] + 1)
            series = tuple(node for _, node in args[:-1])
            return TimeSeries(name, series, self.window(*args[-1]))
        if name == "rank":
            need(1)
            return CrossSectional("rank", args[0][1])
        if name == "scale":
            if len(args) == 1:
                need(1)
                return CrossSectional("scale", args[0][1])
            need(2)
            tok, a = args[1]
            if not isinstance(a, Const):
                raise ParseError("scale target must be a numeric literal", tok.offset)
            return CrossSectional("scale", args[0][1], a.value)
        if name == "indneutralize":
            if len(args) != 2 or args[0][1] is None:
                raise ParseError(f"indneutralize() takes 2 arguments, got {len(args)}", t.offset)
            tok, g = args[1]
            if g is not None:
                raise ParseError("indneutralize group must be a name", tok.offset)
            return CrossSectional("indneutralize", args[0][1], tok.text)
        raise UnknownNameError(f"unknown function {t.text!r}", t.offset)


def parse(source: str, name: str = "") -> AlphaExpr:
    """Parse one alpha expression into an :class:`AlphaExpr`."""
    try:
        ast = _Parser(source).parse()
    except ParseError as exc:
        if name:
            raise type(exc)(f"alpha {name!r}: {exc.reason}", exc.offset, exc.expected) from None
        raise
    return AlphaExpr(name, ast, source)


# pretty printer ---------------------------------------------------------


def _num(v: float) -> str:
    if float(v).is_integer() and abs(v) < 1e15:
        return str(int(v))
    return repr(float(v))


def to_source(node: Node) -> str:
    """Render a tree as fully parenthesized source that parses back to the same tree."""
    if isinstance(node, Const):
        return _num(node.value)
    if isinstance(node, Field):
        return node.label
    if isinstance(node, Unary):
        if node.op in ("-", "!"):
            return f"({node.op}{to_source(node.operand)})"
        return f"{node.op}({to_source(node.operand)})"
    if isinstance(node, Binary):
        if node.op in ("signedpower", "min", "max"):
            return f"{node.op}({to_source(node.left)}, {to_source(node.right)})"
        return f"({to_source(node.left)} {node.op} {to_source(node.right)})"
    if isinstance(node, CrossSectional):
        inner = to_source(node.operand)
        if node.op == "scale" and node.param is not None:
            return f"scale({inner}, {_num(node.param)})"
        if node.op == "indneutralize":
            return f"indneutralize({inner}, {node.param})"
        return f"{node.op}({inner})"
    if isinstance(node, TimeSeries):
        args = ", ".join(to_source(a) for a in node.args)
        return f"{node.op}({args}, {node.window})"
    if isinstance(node, Conditional):
        return f"({to_source(node.cond)} ? {to_source(node.then)} : {to_source(node.other)})"
    raise TypeError(f"not an expression node: {node!r}")


def parse_library(text: str, origin: str = "<string>") -> list[AlphaExpr]:
    """Parse an alpha definition file: ``name: expression`` per line, ``#`` comments."""
    exprs = []
    seen = set()
    for lineno, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if ":" not in body:
            raise DataError(f"{origin}:{lineno}: expected 'name: expression'")
        name, source = body.split(":", 1)
        name = name.strip()
        if not re.fullmatch(r"[A-Za-z_][A-Za-z0-9_]*", name):
            raise DataError(f"{origin}:{lineno}: invalid alpha name {name!r}")
        if name in seen:
            raise DataError(f"{origin}:{lineno}: duplicate alpha name {name!r}")
        seen.add(name)
        try:
            exprs.append(parse(source.strip(), name))
        except ParseError as exc:
            raise type(exc)(f"{origin}:{lineno}: {exc.reason}", exc.offset, exc.expected) from None
    return exprs
