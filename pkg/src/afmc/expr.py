"""Coefficient expressions a(x), b(x) for the difference schemes.

Grammar (recursive descent, ``^`` binds tightest and associates right)::

    expr    := term (('+' | '-') term)*
    term    := unary (('*' | '/') unary)*
    unary   := ('-' | '+') unary | power
    power   := atom ('^' unary)?
    atom    := NUMBER | 'x' | NAME '(' expr ')' | '(' expr ')'

so ``-x^2`` is ``-(x^2)`` and ``2^-1`` is ``0.5``. Evaluation works on
floats and numpy arrays alike.
"""
from __future__ import annotations

import re
from dataclasses import dataclass

import numpy as np

FUNCTIONS = {
    "exp": np.exp,
    "sin": np.sin,
    "cos": np.cos,
    "abs": np.abs,
    "sign": np.sign,
}


class ExprSyntaxError(ValueError):
    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} at offset {offset}")
        self.offset = offset


class ExprNameError(ExprSyntaxError):
    pass


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    pass


@dataclass(frozen=True)
class Neg:
    arg: object


@dataclass(frozen=True)
class BinOp:
    op: str
    left: object
    right: object


@dataclass(frozen=True)
class Call:
    name: str
    arg: object


_TOKEN = re.compile(r"\s*(?:(\d+\.?\d*(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?)|([A-Za-z_]\w*)|(\S))")


def _tokenize(text: str):
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:  # trailing whitespace
            break
        num, name, sym = m.groups()
        start = m.start(m.lastindex)
        if num is not None:
            tokens.append(("num", num, start))
        elif name is not None:
            tokens.append(("name", name, start))
        else:
            tokens.append(("sym", sym, start))
        pos = m.end()
    tokens.append(("end", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.toks = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.toks[self.i]

    def take(self):
        tok = self.toks[self.i]
        self.i += 1
        return tok

    def expect(self, sym: str):
        kind, val, off = self.take()
        if kind != "sym" or val != sym:
            shown = val or "end of input"
            raise ExprSyntaxError(f"expected {sym!r}, found {shown!r}", off)

    def parse(self):
        node = self.expr()
        kind, val, off = self.peek()
        if kind != "end":
            raise ExprSyntaxError(f"unexpected {val!r}", off)
        return node

    def expr(self):
        node = self.term()
        while self.peek()[0] == "sym" and self.peek()[1] in "+-":
            op = self.take()[1]
            node = BinOp(op, node, self.term())
        return node

    def term(self):
        node = self.unary()
        while self.peek()[0] == "sym" and self.peek()[1] in "*/":
            op = self.take()[1]
            node = BinOp(op, node, self.unary())
        return node

    def unary(self):
        kind, val, _ = self.peek()
        if kind == "sym" and val == "-":
            self.take()
            return Neg(self.unary())
        if kind == "sym" and val == "+":
            self.take()
            return self.unary()
        return self.power()

    def power(self):
        base = self.atom()
        if self.peek()[0] == "sym" and self.peek()[1] == "^":
            self.take()
            return BinOp("^", base, self.unary())
        return base

    def atom(self):
        kind, val, off = self.take()
        if kind == "num":
            return Num(float(val))
        if kind == "name":
            if val == "x":
                return Var()
            if val not in FUNCTIONS:
                raise ExprNameError(f"unknown identifier {val!r}", off)
            self.expect("(")
            arg = self.expr()
            self.expect(")")
            return Call(val, arg)
        if kind == "sym" and val == "(":
            node = self.expr()
            self.expect(")")
            return node
        raise ExprSyntaxError(f"unexpected {val or 'end of input'!r}", off)


def _eval(node, x):
    if isinstance(node, Num):
        return node.value
    if isinstance(node, Var):
        return x
    if isinstance(node, Neg):
        return -_eval(node.arg, x)
    if isinstance(node, Call):
        return FUNCTIONS[node.name](_eval(node.arg, x))
    left, right = _eval(node.left, x), _eval(node.right, x)
    if node.op == "+":
        return left + right
    if node.op == "-":
        return left - right
    if node.op == "*":
        return left * right
    if node.op == "/":
        if np.any(np.asarray(right) == 0):
            raise ZeroDivisionError("division by zero in coefficient expression")
        return left / right
    return np.power(left, right)


_PREC = {"+": 1, "-": 1, "*": 2, "/": 2, "neg": 3, "^": 4}


def _fmt(node, parent: int = 0, right_side: bool = False) -> str:
    if isinstance(node, Num):
        s = repr(node.value)
        return s
    if isinstance(node, Var):
        return "x"
    if isinstance(node, Call):
        return f"{node.name}({_fmt(node.arg)})"
    if isinstance(node, Neg):
        s = "-" + _fmt(node.arg, _PREC["neg"])
        return f"({s})" if parent > _PREC["neg"] else s
    p = _PREC[node.op]
    if node.op == "^":
        s = f"{_fmt(node.left, p + 1)}^{_fmt(node.right, _PREC['neg'])}"
    else:
        s = f"{_fmt(node.left, p)}{node.op}{_fmt(node.right, p + 1)}"
    return f"({s})" if p < parent else s


@dataclass(frozen=True)
class CoefficientExpr:
    text: str
    tree: object

    def __call__(self, x):
        return self.evaluate(x)

    def evaluate(self, x):
        with np.errstate(over="ignore", invalid="ignore"):
            out = _eval(self.tree, x)
        if np.ndim(x) and np.ndim(out) == 0:
            out = np.full(np.shape(x), out, dtype=float)
        return out

    def constant(self) -> float | None:
        """Value of the expression if it does not depend on x."""
        if _has_var(self.tree):
            return None
        return float(_eval(self.tree, 0.0))

    def __str__(self) -> str:
        return _fmt(self.tree)


def _has_var(node) -> bool:
    if isinstance(node, Var):
        return True
    if isinstance(node, Num):
        return False
    if isinstance(node, (Neg, Call)):
        return _has_var(node.arg)
    return _has_var(node.left) or _has_var(node.right)


def parse_coefficient_expr(text: str) -> CoefficientExpr:
    if not isinstance(text, str) or not text.strip():
        raise ExprSyntaxError("empty expression", 0)
    return CoefficientExpr(text, _Parser(text).parse())


def lipschitz_probe(expr: CoefficientExpr, lo: float = -10.0, hi: float = 10.0,
                    points: int = 2001) -> float:
    """Largest finite-difference slope of ``expr`` on a uniform grid over [lo, hi]."""
    xs = np.linspace(lo, hi, points)
    ys = np.asarray(expr(xs), dtype=float)
    return float(np.nanmax(np.abs(np.diff(ys) / np.diff(xs))))
