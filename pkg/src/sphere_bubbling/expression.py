"""A small expression language for curvature functions.

Grammar (precedence low to high)::

    expr   := term (('+' | '-') term)*
    term   := unary (('*' | '/') unary)*
    unary  := '-' unary | '+' unary | power
    power  := atom ('^' unary)?          # right associative, binds tighter than unary minus on the left
    atom   := NUMBER | VAR | 'exp' '(' expr ')' | '(' expr ')'

Variables are ``x1 .. x{dim}``.  ``**`` is accepted as a synonym for ``^``.
Trees are immutable tuples; :func:`diff` differentiates symbolically and
:func:`compile_expr` turns a tree into a vectorised numpy callable.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import ArityError, ExpressionSyntaxError

_TOKEN = re.compile(r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)|(?P<name>[A-Za-z_]\w*)"
                    r"|(?P<op>\*\*|[-+*/^(),]))")

FUNCTIONS = {"exp": 1}


@dataclass(frozen=True)
class Node:
    """Expression node: ``op`` with ``args``; leaves carry ``value``."""

    op: str
    args: tuple = ()
    value: object = None

    def __repr__(self):  # compact, for debugging
        if self.op == "num":
            return repr(self.value)
        if self.op == "var":
            return f"x{self.value + 1}"
        return f"{self.op}{self.args!r}"


def num(v: float) -> Node:
    return Node("num", (), float(v))


def var(i: int) -> Node:
    return Node("var", (), int(i))


ZERO, ONE = num(0.0), num(1.0)


def tokenize(text: str):
    pos, out = 0, []
    text = text.rstrip()
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None or m.end() == pos:
            bad = len(text) - len(text[pos:].lstrip())
            raise ExpressionSyntaxError(f"unexpected character {text[bad]!r}", bad)
        start = m.start(m.lastgroup)
        kind = m.lastgroup
        tok = m.group(kind)
        if tok == "**":
            tok = "^"
        out.append((kind, tok, start))
        pos = m.end()
    out.append(("end", "", len(text)))
    return out


class _Parser:
    def __init__(self, text: str, dim: int):
        self.toks = tokenize(text)
        self.i = 0
        self.dim = dim

    def peek(self):
        return self.toks[self.i]

    def take(self, tok=None):
        t = self.toks[self.i]
        if tok is not None and t[1] != tok:
            raise ExpressionSyntaxError(f"expected {tok!r} but found {t[1] or 'end of input'!r}", t[2])
        self.i += 1
        return t

    def parse(self) -> Node:
        if self.peek()[0] == "end":
            raise ExpressionSyntaxError("empty expression", 0)
        node = self.expr()
        t = self.peek()
        if t[0] != "end":
            raise ExpressionSyntaxError(f"unexpected token {t[1]!r}", t[2])
        return node

    def expr(self):
        node = self.term()
        while self.peek()[1] in ("+", "-"):
            op = self.take()[1]
            rhs = self.term()
            node = Node("add" if op == "+" else "sub", (node, rhs))
        return node

    def term(self):
        node = self.unary()
        while self.peek()[1] in ("*", "/"):
            op = self.take()[1]
            rhs = self.unary()
            node = Node("mul" if op == "*" else "div", (node, rhs))
        return node

    def unary(self):
        t = self.peek()
        if t[1] == "-":
            self.take()
            return Node("neg", (self.unary(),))
        if t[1] == "+":
            self.take()
            return self.unary()
        return self.power()

    def power(self):
        base = self.atom()
        if self.peek()[1] == "^":
            self.take()
            return Node("pow", (base, self.unary()))
        return base

    def atom(self):
        kind, tok, pos = self.peek()
        if kind == "num":
            self.take()
            return num(float(tok))
        if kind == "name":
            self.take()
            m = re.fullmatch(r"x(\d+)", tok)
            if m:
                k = int(m.group(1))
                if not (1 <= k <= self.dim):
                    raise ExpressionSyntaxError(
                        f"variable {tok} out of range x1..x{self.dim}", pos)
                return var(k - 1)
            if tok in FUNCTIONS:
                self.take("(")
                args = [self.expr()]
                while self.peek()[1] == ",":
                    self.take()
                    args.append(self.expr())
                self.take(")")
                if len(args) != FUNCTIONS[tok]:
                    raise ArityError(f"{tok} takes {FUNCTIONS[tok]} argument(s), got {len(args)}")
                return Node(tok, tuple(args))
            raise ExpressionSyntaxError(f"unknown name {tok!r}", pos)
        if tok == "(":
            self.take()
            node = self.expr()
            self.take(")")
            return node
        raise ExpressionSyntaxError(f"unexpected token {tok or 'end of input'!r}", pos)


ARITY = {"num": 0, "var": 0, "add": 2, "sub": 2, "mul": 2, "div": 2, "pow": 2, "neg": 1,
         "exp": 1, "log": 1}


def check_arity(node: Node):
    if node.op not in ARITY:
        raise ArityError(f"unknown operator {node.op!r}")
    if len(node.args) != ARITY[node.op]:
        raise ArityError(f"{node.op} expects {ARITY[node.op]} operand(s), got {len(node.args)}")
    for a in node.args:
        check_arity(a)


def parse(text: str, dim: int) -> Node:
    """Parse ``text`` over the variables x1..x{dim} and simplify constants."""
    if not isinstance(text, str) or not text.strip():
        raise ExpressionSyntaxError("empty expression", 0)
    tree = _Parser(text, dim).parse()
    check_arity(tree)
    return simplify(tree)


# ---------------------------------------------------------------------------
# simplification and differentiation

def _is(node, v):
    return node.op == "num" and node.value == v


def simplify(node: Node) -> Node:
    if node.op in ("num", "var"):
        return node
    args = tuple(simplify(a) for a in node.args)
    op = node.op
    if all(a.op == "num" for a in args):
        try:
            vals = [a.value for a in args]
            return num(_EVAL_SCALAR[op](*vals))
        except (ZeroDivisionError, OverflowError, ValueError):
            return Node(op, args)
    if op == "add":
        if _is(args[0], 0.0):
            return args[1]
        if _is(args[1], 0.0):
            return args[0]
    elif op == "sub":
        if _is(args[1], 0.0):
            return args[0]
        if _is(args[0], 0.0):
            return simplify(Node("neg", (args[1],)))
    elif op == "mul":
        if _is(args[0], 0.0) or _is(args[1], 0.0):
            return ZERO
        if _is(args[0], 1.0):
            return args[1]
        if _is(args[1], 1.0):
            return args[0]
    elif op == "div":
        if _is(args[0], 0.0):
            return ZERO
        if _is(args[1], 1.0):
            return args[0]
    elif op == "pow":
        if _is(args[1], 0.0):
            return ONE
        if _is(args[1], 1.0):
            return args[0]
    elif op == "neg":
        if args[0].op == "neg":
            return args[0].args[0]
    return Node(op, args)


_EVAL_SCALAR = {
    "add": lambda a, b: a + b,
    "sub": lambda a, b: a - b,
    "mul": lambda a, b: a * b,
    "div": lambda a, b: a / b,
    "pow": lambda a, b: a ** b if not (a < 0 and b != int(b)) else math.nan,
    "neg": lambda a: -a,
    "exp": math.exp,
    "log": math.log,
}


def diff(node: Node, i: int) -> Node:
    """Symbolic partial derivative with respect to variable index ``i`` (0-based)."""
    op, a = node.op, node.args
    if op == "num":
        return ZERO
    if op == "var":
        return ONE if node.value == i else ZERO
    if op in ("add", "sub"):
        return simplify(Node(op, (diff(a[0], i), diff(a[1], i))))
    if op == "neg":
        return simplify(Node("neg", (diff(a[0], i),)))
    if op == "mul":
        return simplify(Node("add", (Node("mul", (diff(a[0], i), a[1])),
                                     Node("mul", (a[0], diff(a[1], i))))))
    if op == "div":
        u, v = a
        num_ = Node("sub", (Node("mul", (diff(u, i), v)), Node("mul", (u, diff(v, i)))))
        return simplify(Node("div", (num_, Node("pow", (v, num(2.0))))))
    if op == "exp":
        return simplify(Node("mul", (node, diff(a[0], i))))
    if op == "log":
        return simplify(Node("div", (diff(a[0], i), a[0])))
    if op == "pow":
        u, v = a
        dv = diff(v, i)
        if v.op == "num" and dv.op == "num" and dv.value == 0.0:
            # d(u^c) = c u^(c-1) du
            return simplify(Node("mul", (Node("mul", (v, Node("pow", (u, num(v.value - 1.0))))),
                                         diff(u, i))))
        # general power: u^v (v' log u + v u'/u)
        inner = Node("add", (Node("mul", (dv, Node("log", (u,)))),
                             Node("div", (Node("mul", (v, diff(u, i))), u))))
        return simplify(Node("mul", (node, inner)))
    raise ArityError(f"cannot differentiate {op!r}")


def variables(node: Node) -> set:
    if node.op == "var":
        return {node.value}
    out = set()
    for a in node.args:
        out |= variables(a)
    return out


# ---------------------------------------------------------------------------
# evaluation

def _power(a, b):
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.power(a, b)


_EVAL_ARRAY = {
    "add": np.add,
    "sub": np.subtract,
    "mul": np.multiply,
    "div": lambda a, b: np.divide(a, b),
    "pow": _power,
    "neg": np.negative,
    "exp": np.exp,
    "log": np.log,
}


def compile_expr(node: Node) -> Callable[[np.ndarray], np.ndarray]:
    """Vectorised evaluator ``f(X)`` with ``X`` of shape (m, dim) or (dim,)."""

    def build(nd):
        if nd.op == "num":
            v = nd.value
            return lambda X: np.full(X.shape[:-1], v)
        if nd.op == "var":
            k = nd.value
            return lambda X: X[..., k]
        fs = [build(a) for a in nd.args]
        g = _EVAL_ARRAY[nd.op]
        if len(fs) == 1:
            f0 = fs[0]
            return lambda X: g(f0(X))
        f0, f1 = fs
        return lambda X: g(f0(X), f1(X))

    fn = build(node)

    def evaluate(X):
        X = np.asarray(X)
        if not np.iscomplexobj(X):
            X = X.astype(float, copy=False)
        with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
            return fn(X)

    return evaluate


def to_string(node: Node) -> str:
    """Fully parenthesised text that parses back to the same tree."""
    op = node.op
    if op == "num":
        return repr(node.value)
    if op == "var":
        return f"x{node.value + 1}"
    if op in ("exp", "log"):
        return f"{op}({to_string(node.args[0])})"
    if op == "neg":
        return f"(-{to_string(node.args[0])})"
    sym = {"add": "+", "sub": "-", "mul": "*", "div": "/", "pow": "^"}[op]
    return f"({to_string(node.args[0])}{sym}{to_string(node.args[1])})"
