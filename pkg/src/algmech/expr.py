"""Tiny arithmetic expression language for config-defined systems.

Grammar: identifiers x1..xm and y1..yr, numeric literals, + - * / ^,
parentheses, unary minus, and the functions sin, cos, exp, sqrt.  Compiled
to closures over the bundle point; no Python evaluation of user strings.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Callable, List

import numpy as np

__all__ = ["ExprError", "compile_expression"]

_FUNCTIONS = {
    "sin": math.sin,
    "cos": math.cos,
    "exp": math.exp,
    "sqrt": math.sqrt,
}

_TOKEN_RE = re.compile(r"""
    (?P<num>\d+\.?\d*(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op>[-+*/^()])
  | (?P<ws>\s+)
""", re.VERBOSE)


class ExprError(ValueError):
    """Parse or name error in a config expression, with column information."""

    def __init__(self, msg: str, src: str, col: int):
        super().__init__(f"{msg} (column {col + 1}): {src!r}")
        self.col = col
        self.src = src


@dataclass(frozen=True)
class _Tok:
    kind: str
    text: str
    col: int


def _tokenize(src: str) -> List[_Tok]:
    out: List[_Tok] = []
    pos = 0
    while pos < len(src):
        mm = _TOKEN_RE.match(src, pos)
        if not mm:
            raise ExprError(f"unexpected character {src[pos]!r}", src, pos)
        kind = mm.lastgroup
        if kind != "ws":
            out.append(_Tok(kind=kind, text=mm.group(), col=pos))
        pos = mm.end()
    return out


class _Parser:
    def __init__(self, src: str, m: int, r: int):
        self.src = src
        self.toks = _tokenize(src)
        self.i = 0
        self.m = m
        self.r = r

    def peek(self):
        return self.toks[self.i] if self.i < len(self.toks) else None

    def take(self):
        tok = self.peek()
        if tok is None:
            raise ExprError("unexpected end of expression", self.src, len(self.src))
        self.i += 1
        return tok

    def expect(self, text: str):
        tok = self.take()
        if tok.text != text:
            raise ExprError(f"expected {text!r}, found {tok.text!r}", self.src, tok.col)

    def parse(self) -> Callable:
        node = self.expr()
        tok = self.peek()
        if tok is not None:
            raise ExprError(f"trailing input {tok.text!r}", self.src, tok.col)
        return node

    def expr(self):
        node = self.term()
        while (tok := self.peek()) is not None and tok.text in "+-":
            self.take()
            rhs = self.term()
            node = (lambda a, b: lambda u: a(u) + b(u))(node, rhs) if tok.text == "+" \
                else (lambda a, b: lambda u: a(u) - b(u))(node, rhs)
        return node

    def term(self):
        node = self.unary()
        while (tok := self.peek()) is not None and tok.text in "*/":
            self.take()
            rhs = self.unary()
            node = (lambda a, b: lambda u: a(u) * b(u))(node, rhs) if tok.text == "*" \
                else (lambda a, b: lambda u: a(u) / b(u))(node, rhs)
        return node

    def unary(self):
        tok = self.peek()
        if tok is not None and tok.text == "-":
            self.take()
            inner = self.unary()
            return lambda u: -inner(u)
        return self.power()

    def power(self):
        base = self.atom()
        tok = self.peek()
        if tok is not None and tok.text == "^":
            self.take()
            expo = self.unary()          # right associative
            return lambda u: base(u) ** expo(u)
        return base

    def atom(self):
        tok = self.take()
        if tok.kind == "num":
            val = float(tok.text)
            return lambda u: val
        if tok.kind == "ident":
            name = tok.text
            if name in _FUNCTIONS:
                fn = _FUNCTIONS[name]
                self.expect("(")
                inner = self.expr()
                self.expect(")")
                return lambda u: fn(inner(u))
            idx = self._var_index(name, tok.col)
            return lambda u: u[idx]
        if tok.text == "(":
            inner = self.expr()
            self.expect(")")
            return inner
        raise ExprError(f"unexpected token {tok.text!r}", self.src, tok.col)

    def _var_index(self, name: str, col: int) -> int:
        mm = re.fullmatch(r"([xy])(\d+)", name)
        if not mm:
            raise ExprError(f"unknown identifier {name!r}", self.src, col)
        k = int(mm.group(2))
        if mm.group(1) == "x":
            if not 1 <= k <= self.m:
                raise ExprError(f"base index out of range in {name!r}", self.src, col)
            return k - 1
        if not 1 <= k <= self.r:
            raise ExprError(f"fibre index out of range in {name!r}", self.src, col)
        return self.m + k - 1


def compile_expression(src: str, m: int, r: int) -> Callable[[np.ndarray], float]:
    """Compile an expression over x1..xm, y1..yr to a scalar function of u."""
    fn = _Parser(str(src), m, r).parse()
    return lambda u: float(fn(np.asarray(u, dtype=float)))
