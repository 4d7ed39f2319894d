"""A small arithmetic expression language for problem data.

Grammar (loosest binding first)::

    expr   := term (('+' | '-') term)*
    term   := unary (('*' | '/') unary)*
    unary  := '-' unary | power
    power  := atom ('^' unary)?          # right associative
    atom   := NUMBER | NAME | NAME '(' expr ')' | '(' expr ')'

Unary minus binds looser than ``^``, so ``-2^2 == -4`` and ``2^-1 == 0.5``.
Variables are ``t``, ``x``, ``y``; ``pi`` is a constant; functions are
``sin cos exp sqrt abs``. Evaluation is vectorized over numpy arrays.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass

import numpy as np

VARIABLES = ("t", "x", "y")
CONSTANTS = {"pi": math.pi}
FUNCTIONS = {"sin": np.sin, "cos": np.cos, "exp": np.exp, "sqrt": np.sqrt, "abs": np.abs}


class ExpressionError(ValueError):
    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} at byte offset {offset}")
        self.offset = offset


class EvaluationError(ExpressionError):
    pass


@dataclass(frozen=True)
class Num:
    value: float
    offset: int = 0


@dataclass(frozen=True)
class Var:
    name: str
    offset: int = 0


@dataclass(frozen=True)
class Neg:
    operand: "Node"
    offset: int = 0


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Node"
    right: "Node"
    offset: int = 0


@dataclass(frozen=True)
class Call:
    func: str
    arg: "Node"
    offset: int = 0


Node = Num | Var | Neg | BinOp | Call

_TOKEN = re.compile(rb"""
    (?P<ws>[ \t\r\n]+)
  | (?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<name>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op>[-+*/^()])
""", re.VERBOSE)


def _tokenize(data: bytes):
    pos = 0
    tokens = []
    while pos < len(data):
        m = _TOKEN.match(data, pos)
        if m is None:
            raise ExpressionError(f"unexpected character {data[pos:pos + 1]!r}", pos)
        kind = m.lastgroup
        if kind != "ws":
            tokens.append((kind, m.group().decode("ascii"), pos))
        pos = m.end()
    tokens.append(("end", "", len(data)))
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.tokens = _tokenize(text.encode("utf-8"))
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def parse(self) -> Node:
        node = self.expr()
        kind, text, pos = self.peek()
        if kind != "end":
            if text == ")":
                raise ExpressionError("unbalanced ')'", pos)
            raise ExpressionError(f"unexpected trailing {text!r}", pos)
        return node

    def expr(self) -> Node:
        node = self.term()
        while self.peek()[1] in ("+", "-"):
            _, op, pos = self.take()
            node = BinOp(op, node, self.term(), pos)
        return node

    def term(self) -> Node:
        node = self.unary()
        while self.peek()[1] in ("*", "/"):
            _, op, pos = self.take()
            node = BinOp(op, node, self.unary(), pos)
        return node

    def unary(self) -> Node:
        kind, text, pos = self.peek()
        if kind == "op" and text == "-":
            self.take()
            return Neg(self.unary(), pos)
        return self.power()

    def power(self) -> Node:
        base = self.atom()
        kind, text, pos = self.peek()
        if text == "^":
            self.take()
            return BinOp("^", base, self.unary(), pos)
        return base

    def atom(self) -> Node:
        kind, text, pos = self.take()
        if kind == "num":
            value = float(text)
            if not math.isfinite(value):
                raise ExpressionError(f"number {text} out of range", pos)
            return Num(value, pos)
        if kind == "name":
            if text in FUNCTIONS:
                if self.peek()[1] != "(":
                    raise ExpressionError(f"function {text!r} needs an argument", self.peek()[2])
                self.take()
                arg = self.expr()
                if self.peek()[1] != ")":
                    raise ExpressionError("unbalanced '(': expected ')'", self.peek()[2])
                self.take()
                return Call(text, arg, pos)
            if text in VARIABLES or text in CONSTANTS:
                return Var(text, pos)
            raise ExpressionError(f"unknown identifier {text!r}", pos)
        if text == "(":
            node = self.expr()
            if self.peek()[1] != ")":
                raise ExpressionError("unbalanced '(': expected ')'", self.peek()[2])
            self.take()
            return node
        if kind == "end":
            raise ExpressionError("unexpected end of input", pos)
        raise ExpressionError(f"unexpected {text!r}", pos)


def _strip(node: Node) -> Node:
    """Copy of ``node`` with all offsets zeroed, for structural comparison."""
    if isinstance(node, Num):
        return Num(node.value)
    if isinstance(node, Var):
        return Var(node.name)
    if isinstance(node, Neg):
        return Neg(_strip(node.operand))
    if isinstance(node, Call):
        return Call(node.func, _strip(node.arg))
    return BinOp(node.op, _strip(node.left), _strip(node.right))


def _to_text(node: Node) -> str:
    if isinstance(node, Num):
        return repr(node.value)
    if isinstance(node, Var):
        return node.name
    if isinstance(node, Neg):
        return f"(-{_to_text(node.operand)})"
    if isinstance(node, Call):
        return f"{node.func}({_to_text(node.arg)})"
    return f"({_to_text(node.left)} {node.op} {_to_text(node.right)})"


def _eval(node: Node, env: dict):
    if isinstance(node, Num):
        return node.value
    if isinstance(node, Var):
        if node.name in CONSTANTS:
            return CONSTANTS[node.name]
        return env[node.name]
    if isinstance(node, Neg):
        return -_eval(node.operand, env)
    if isinstance(node, Call):
        value = FUNCTIONS[node.func](_eval(node.arg, env))
    else:
        a, b = _eval(node.left, env), _eval(node.right, env)
        if node.op == "+":
            value = a + b
        elif node.op == "-":
            value = a - b
        elif node.op == "*":
            value = a * b
        elif node.op == "/":
            value = np.divide(a, b)
        else:
            value = np.power(np.asarray(a, dtype=float), b)
    if not np.all(np.isfinite(value)):
        what = f"{node.func}()" if isinstance(node, Call) else f"operator {node.op!r}"
        raise EvaluationError(f"non-finite result of {what}", node.offset)
    return value


class Expression:
    """Parsed expression; call with keyword variables ``t``, ``x``, ``y``."""

    def __init__(self, text: str):
        self.text = text
        self.root = _Parser(text).parse()

    def __call__(self, t=0.0, x=0.0, y=0.0):
        with np.errstate(all="ignore"):
            return _eval(self.root, {"t": t, "x": x, "y": y})

    def canonical(self) -> str:
        return _to_text(self.root)

    def __str__(self):
        return self.canonical()

    def __repr__(self):
        return f"Expression({self.text!r})"

    def __eq__(self, other):
        return isinstance(other, Expression) and _strip(self.root) == _strip(other.root)

    def __hash__(self):
        return hash(_strip(self.root))

    @property
    def variables(self) -> set[str]:
        found = set()

        def walk(node):
            if isinstance(node, Var) and node.name in VARIABLES:
                found.add(node.name)
            for child in (getattr(node, "operand", None), getattr(node, "arg", None),
                          getattr(node, "left", None), getattr(node, "right", None)):
                if child is not None:
                    walk(child)

        walk(self.root)
        return found

    def spatial(self, t: float = 0.0):
        """Spatial function ``points -> values`` at fixed time ``t``."""

        def fn(points):
            points = np.asarray(points, dtype=float)
            x = points[:, 0]
            y = points[:, 1] if points.shape[1] > 1 else np.zeros_like(x)
            return np.broadcast_to(self(t=t, x=x, y=y), x.shape)

        return fn


def parse_expression(text: str) -> Expression:
    return Expression(text)
