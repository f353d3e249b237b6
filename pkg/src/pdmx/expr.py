"""Small arithmetic-expression language for custom masses and potentials.

Expressions use one free variable (``x`` by default), the operators
``+ - * / ^`` and the functions ``exp, log, sqrt, sin, cos, asinh``.
Parsing goes through :mod:`ast`; the resulting tree evaluates on numpy
arrays and differentiates symbolically, so custom masses get exact
derivatives.
"""

from __future__ import annotations

import ast
import math

import numpy as np


class ExprError(ValueError):
    def __init__(self, msg, position=None):
        self.position = position
        if position is not None:
            msg = f"{msg} (at position {position})"
        super().__init__(msg)


class Node:
    def __add__(self, other):
        return add(self, _wrap(other))

    def __radd__(self, other):
        return add(_wrap(other), self)

    def __sub__(self, other):
        return sub(self, _wrap(other))

    def __mul__(self, other):
        return mul(self, _wrap(other))

    def __rmul__(self, other):
        return mul(_wrap(other), self)

    def __truediv__(self, other):
        return div(self, _wrap(other))

    def __neg__(self):
        return mul(Const(-1.0), self)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        with np.errstate(all="ignore"):
            out = self.eval(x)
        return np.broadcast_to(out, x.shape).astype(float) if np.ndim(out) < x.ndim else out


class Const(Node):
    def __init__(self, value):
        self.value = float(value)

    def eval(self, x):
        return np.full(np.shape(x), self.value) if np.ndim(x) else self.value

    def diff(self):
        return Const(0.0)

    def __str__(self):
        return repr(self.value) if self.value >= 0 else f"({self.value!r})"


class Var(Node):
    def __init__(self, name):
        self.name = name

    def eval(self, x):
        return x

    def diff(self):
        return Const(1.0)

    def __str__(self):
        return self.name


class BinOp(Node):
    def __init__(self, op, left, right):
        self.op, self.left, self.right = op, left, right

    def eval(self, x):
        a, b = self.left.eval(x), self.right.eval(x)
        if self.op == "+":
            return a + b
        if self.op == "-":
            return a - b
        if self.op == "*":
            return a * b
        if self.op == "/":
            return a / b
        return np.power(a, b)

    def diff(self):
        u, v = self.left, self.right
        du, dv = u.diff(), v.diff()
        if self.op == "+":
            return add(du, dv)
        if self.op == "-":
            return sub(du, dv)
        if self.op == "*":
            return add(mul(du, v), mul(u, dv))
        if self.op == "/":
            return div(sub(mul(du, v), mul(u, dv)), power(v, Const(2.0)))
        # power
        if isinstance(v, Const):
            return mul(mul(Const(v.value), power(u, Const(v.value - 1.0))), du)
        # d(u^v) = u^v (v' log u + v u'/u)
        return mul(self, add(mul(dv, Func("log", u)), div(mul(v, du), u)))

    def __str__(self):
        op = "^" if self.op == "**" else self.op
        return f"({self.left} {op} {self.right})"


class Func(Node):
    def __init__(self, name, arg):
        self.name, self.arg = name, arg

    def eval(self, x):
        return _FUNCS[self.name](self.arg.eval(x))

    def diff(self):
        u = self.arg
        du = u.diff()
        if self.name == "exp":
            outer = self
        elif self.name == "log":
            outer = div(Const(1.0), u)
        elif self.name == "sqrt":
            outer = div(Const(0.5), self)
        elif self.name == "sin":
            outer = Func("cos", u)
        elif self.name == "cos":
            outer = mul(Const(-1.0), Func("sin", u))
        else:  # asinh
            outer = div(Const(1.0), Func("sqrt", add(Const(1.0), power(u, Const(2.0)))))
        return mul(outer, du)

    def __str__(self):
        return f"{self.name}({self.arg})"


_FUNCS = {
    "exp": np.exp,
    "log": np.log,
    "sqrt": np.sqrt,
    "sin": np.sin,
    "cos": np.cos,
    "asinh": np.arcsinh,
}
_CONSTS = {"pi": math.pi, "e": math.e}


def _wrap(v):
    return v if isinstance(v, Node) else Const(v)


def _is(node, value):
    return isinstance(node, Const) and node.value == value


def add(a, b):
    if isinstance(a, Const) and isinstance(b, Const):
        return Const(a.value + b.value)
    if _is(a, 0.0):
        return b
    if _is(b, 0.0):
        return a
    return BinOp("+", a, b)


def sub(a, b):
    if isinstance(a, Const) and isinstance(b, Const):
        return Const(a.value - b.value)
    if _is(b, 0.0):
        return a
    return BinOp("-", a, b)


def mul(a, b):
    if isinstance(a, Const) and isinstance(b, Const):
        return Const(a.value * b.value)
    if _is(a, 0.0) or _is(b, 0.0):
        return Const(0.0)
    if _is(a, 1.0):
        return b
    if _is(b, 1.0):
        return a
    return BinOp("*", a, b)


def div(a, b):
    if _is(a, 0.0):
        return Const(0.0)
    if _is(b, 1.0):
        return a
    if isinstance(a, Const) and isinstance(b, Const):
        return Const(a.value / b.value)
    return BinOp("/", a, b)


def power(a, b):
    if _is(b, 0.0):
        return Const(1.0)
    if _is(b, 1.0):
        return a
    if isinstance(a, Const) and isinstance(b, Const):
        return Const(a.value ** b.value)
    return BinOp("**", a, b)


_BINOPS = {ast.Add: add, ast.Sub: sub, ast.Mult: mul, ast.Div: div, ast.Pow: power}


def parse(text: str, var: str = "x") -> Node:
    """Parse ``text`` into an expression tree in the single variable ``var``."""
    src = text.replace("^", "**")
    try:
        tree = ast.parse(src, mode="eval")
    except SyntaxError as exc:
        raise ExprError(f"syntax error in {text!r}", _orig_index(text, (exc.offset or 1) - 1)) from None
    return _convert(tree.body, var, text)


def _pos(node, text):
    col = getattr(node, "col_offset", None)
    return None if col is None else _orig_index(text, col)


def _orig_index(text, col):
    # column in the '^' -> '**' expanded source, mapped back to ``text``
    expanded = 0
    for i, ch in enumerate(text):
        if expanded >= col:
            return i
        expanded += 2 if ch == "^" else 1
    return len(text)


def _convert(node, var, text):
    if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
        return Const(node.value)
    if isinstance(node, ast.Name):
        if node.id == var:
            return Var(var)
        if node.id in _CONSTS:
            return Const(_CONSTS[node.id])
        raise ExprError(f"unknown name {node.id!r}", _pos(node, text))
    if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
        return _BINOPS[type(node.op)](_convert(node.left, var, text), _convert(node.right, var, text))
    if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
        inner = _convert(node.operand, var, text)
        return mul(Const(-1.0), inner) if isinstance(node.op, ast.USub) else inner
    if isinstance(node, ast.Call) and isinstance(node.func, ast.Name):
        if node.func.id not in _FUNCS:
            raise ExprError(f"unknown function {node.func.id!r}", _pos(node, text))
        if len(node.args) != 1 or node.keywords:
            raise ExprError(f"{node.func.id} takes exactly one argument", _pos(node, text))
        return Func(node.func.id, _convert(node.args[0], var, text))
    raise ExprError("unsupported construct", _pos(node, text))
