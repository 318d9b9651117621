"""Coefficient expressions: parsing, printing and evaluation.

Grammar (EBNF)::

    expr    = term { ("+" | "-") term } ;
    term    = unary { ("*" | "/") unary } ;
    unary   = ("-" | "+") unary | power ;
    power   = atom [ "^" unary ] ;               (* right-associative *)
    atom    = number | name | name "(" expr ")" | "(" expr ")" ;
    number  = digits [ "." digits ] [ ("e" | "E") [ "+" | "-" ] digits ] ;
    name    = letter { letter | digit | "_" } ;

Functions: ``exp ln sin cos sqrt``.  ``pi`` is a constant; every other
name is a variable (``t``, ``x1`` .. ``xn``, ``X``, ``Y``, ``Z`` ...).

The parser is a Pratt parser; binding powers give ``^`` > unary minus >
``* /`` > ``+ -``.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Mapping, Sequence, Union

import numpy as np

from .errors import DomainError, ParseError
from .taylor import Jet

FUNCTIONS = ("exp", "ln", "sin", "cos", "sqrt")
CONSTANTS = {"pi": math.pi}


@dataclass(frozen=True)
class Num:
    value: float
    pos: int = field(default=-1, compare=False, repr=False)


@dataclass(frozen=True)
class Var:
    name: str
    pos: int = field(default=-1, compare=False, repr=False)


@dataclass(frozen=True)
class Neg:
    operand: "Node"
    pos: int = field(default=-1, compare=False, repr=False)


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Node"
    right: "Node"
    pos: int = field(default=-1, compare=False, repr=False)


@dataclass(frozen=True)
class Call:
    func: str
    arg: "Node"
    pos: int = field(default=-1, compare=False, repr=False)


Node = Union[Num, Var, Neg, BinOp, Call]

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z0-9_]*)|(?P<op>[-+*/^(),]))"
)

_LBP = {"+": 10, "-": 10, "*": 20, "/": 20, "^": 40}
_UNARY_BP = 30


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.tokens = self._tokenize(text)
        self.i = 0

    def _tokenize(self, text):
        tokens = []
        pos = 0
        while True:
            while pos < len(text) and text[pos].isspace():
                pos += 1
            if pos >= len(text):
                break
            m = _TOKEN.match(text, pos)
            if m is None or m.end() == pos:
                raise ParseError(pos, {"number", "name", "operator"}, text)
            kind = m.lastgroup
            start = m.start(kind)
            tokens.append((kind, m.group(kind), start))
            pos = m.end()
        tokens.append(("end", "", len(text)))
        return tokens

    @property
    def tok(self):
        return self.tokens[self.i]

    def advance(self):
        t = self.tokens[self.i]
        self.i += 1
        return t

    def expect(self, value):
        kind, val, pos = self.tok
        if val != value or kind == "end":
            raise ParseError(pos, {value}, self.text)
        self.advance()

    def expression(self, rbp=0) -> Node:
        left = self.nud(self.advance())
        while True:
            kind, val, pos = self.tok
            lbp = _LBP.get(val, 0) if kind == "op" else 0
            if rbp >= lbp:
                return left
            self.advance()
            if val == "^":
                # right-associative
                right = self.expression(lbp - 1)
            else:
                right = self.expression(lbp)
            left = BinOp(val, left, right, pos)

    def nud(self, token) -> Node:
        kind, val, pos = token
        if kind == "num":
            return Num(float(val), pos)
        if kind == "name":
            if val in FUNCTIONS:
                self.expect("(")
                arg = self.expression()
                self.expect(")")
                return Call(val, arg, pos)
            if val in CONSTANTS:
                return Num(CONSTANTS[val], pos)
            return Var(val, pos)
        if val == "(":
            inner = self.expression()
            self.expect(")")
            return inner
        if val == "-":
            return Neg(self.expression(_UNARY_BP), pos)
        if val == "+":
            return self.expression(_UNARY_BP)
        raise ParseError(pos, {"number", "name", "(", "-"}, self.text)


def parse(text: str, variables: Sequence[str] | None = None) -> Node:
    """Parse ``text``; optionally restrict the allowed variable names."""
    p = _Parser(text)
    node = p.expression()
    kind, _, pos = p.tok
    if kind != "end":
        raise ParseError(pos, {"operator", "end of input"}, text)
    if variables is not None:
        allowed = set(variables)
        for v in iter_vars(node):
            if v.name not in allowed:
                raise ParseError(v.pos, allowed, text)
    return node


def as_expr(obj) -> Node:
    """Accept an AST, a number or a string."""
    if isinstance(obj, (Num, Var, Neg, BinOp, Call)):
        return obj
    if isinstance(obj, (int, float, np.floating, np.integer)):
        return Num(float(obj))
    if isinstance(obj, str):
        return parse(obj)
    raise TypeError(f"cannot use {obj!r} as an expression")


def iter_vars(node: Node):
    if isinstance(node, Var):
        yield node
    elif isinstance(node, Neg):
        yield from iter_vars(node.operand)
    elif isinstance(node, BinOp):
        yield from iter_vars(node.left)
        yield from iter_vars(node.right)
    elif isinstance(node, Call):
        yield from iter_vars(node.arg)


def free_vars(node: Node) -> set:
    return {v.name for v in iter_vars(node)}


def x_vars(n: int) -> list:
    return [f"x{i + 1}" for i in range(n)]


# printing

def to_text(node: Node) -> str:
    """Fully parenthesized text; parser-built trees round-trip exactly."""
    if isinstance(node, Num):
        v = float(node.value)
        return f"({v!r})" if v < 0 or math.copysign(1.0, v) < 0 else repr(v)
    if isinstance(node, Var):
        return node.name
    if isinstance(node, Neg):
        return f"(-{to_text(node.operand)})"
    if isinstance(node, BinOp):
        return f"({to_text(node.left)} {node.op} {to_text(node.right)})"
    return f"{node.func}({to_text(node.arg)})"


# plain evaluation (scalars or numpy arrays)

def _is_int(x) -> bool:
    return np.ndim(x) == 0 and float(x).is_integer() and abs(float(x)) < 2**31


def _ipow(base, k: int):
    if k < 0:
        denom = _ipow(base, -k)
        if np.any(denom == 0):
            raise DomainError("division by zero in negative integer power")
        return 1.0 / denom
    out = np.ones_like(base) if isinstance(base, np.ndarray) else 1.0
    b = base
    while k:
        if k & 1:
            out = out * b
        b = b * b
        k >>= 1
    return out


def evaluate(node: Node, env: Mapping[str, object]):
    """IEEE double evaluation; ``env`` values may be floats or arrays."""
    if isinstance(node, Num):
        return node.value
    if isinstance(node, Var):
        try:
            return env[node.name]
        except KeyError:
            raise DomainError(f"unbound variable {node.name!r}", node.pos) from None
    if isinstance(node, Neg):
        return -evaluate(node.operand, env)
    if isinstance(node, BinOp):
        a = evaluate(node.left, env)
        b = evaluate(node.right, env)
        if node.op == "+":
            return a + b
        if node.op == "-":
            return a - b
        if node.op == "*":
            return a * b
        if node.op == "/":
            if np.any(np.asarray(b) == 0):
                raise DomainError("division by zero", node.pos)
            return a / b
        if _is_int(b):
            return _ipow(a, int(b))
        if np.any(np.asarray(a) <= 0):
            raise DomainError("non-integer power of a non-positive base", node.pos)
        return np.exp(b * np.log(a))
    x = evaluate(node.arg, env)
    if node.func == "exp":
        return np.exp(x)
    if node.func == "ln":
        if np.any(np.asarray(x) <= 0):
            raise DomainError("logarithm of a non-positive number", node.pos)
        return np.log(x)
    if node.func == "sin":
        return np.sin(x)
    if node.func == "cos":
        return np.cos(x)
    if np.any(np.asarray(x) < 0):
        raise DomainError("square root of a negative number", node.pos)
    return np.sqrt(x)


def compile_expr(node: Node, names: Sequence[str]):
    """Callable ``f(*values)`` binding positional arguments to ``names``."""

    def f(*values):
        return evaluate(node, dict(zip(names, values)))

    return f


# Taylor evaluation

def eval_jet(node: Node, env: Mapping[str, float], variables: Sequence[str], order: int) -> Jet:
    """Evaluate in truncated Taylor arithmetic over ``variables``."""
    nv = len(variables)
    seeds = {
        name: Jet.variable(float(env[name]), i, nv, order) for i, name in enumerate(variables)
    }

    def rec(nd):
        if isinstance(nd, Num):
            return Jet.constant(nd.value, nv, order)
        if isinstance(nd, Var):
            if nd.name in seeds:
                return seeds[nd.name]
            try:
                return Jet.constant(float(env[nd.name]), nv, order)
            except KeyError:
                raise DomainError(f"unbound variable {nd.name!r}", nd.pos) from None
        if isinstance(nd, Neg):
            return -rec(nd.operand)
        try:
            if isinstance(nd, BinOp):
                if nd.op == "^" and isinstance(nd.right, Num) and _is_int(nd.right.value):
                    return rec(nd.left).powi(int(nd.right.value))
                a, b = rec(nd.left), rec(nd.right)
                if nd.op == "+":
                    return a + b
                if nd.op == "-":
                    return a - b
                if nd.op == "*":
                    return a * b
                if nd.op == "/":
                    return a / b
                if np.allclose(b.c[1:], 0.0) and _is_int(b.value):
                    return a.powi(int(b.value))
                if np.allclose(b.c[1:], 0.0):
                    return a.powr(b.value)
                return (b * a.log()).exp()
            x = rec(nd.arg)
            return {"exp": Jet.exp, "ln": Jet.log, "sin": Jet.sin, "cos": Jet.cos, "sqrt": Jet.sqrt}[
                nd.func
            ](x)
        except DomainError as exc:
            if exc.offset is None:
                raise DomainError(str(exc), nd.pos) from None
            raise

    return rec(node)


@dataclass
class Taylor2:
    value: float
    gradient: np.ndarray
    hessian: np.ndarray
    variables: tuple


def eval_taylor2(node: Node, env: Mapping[str, float], variables: Sequence[str]) -> Taylor2:
    jet = eval_jet(node, env, variables, 2)
    return Taylor2(jet.value, jet.gradient(), jet.hessian(), tuple(variables))


# tree construction with light constant folding

ZERO = Num(0.0)
ONE = Num(1.0)


def _const(node):
    return node.value if isinstance(node, Num) else None


def add(*terms: Node) -> Node:
    const = 0.0
    rest = []
    for t in terms:
        c = _const(t)
        if c is not None:
            const += c
        else:
            rest.append(t)
    if const != 0.0 or not rest:
        rest.append(Num(const))
    out = rest[0]
    for t in rest[1:]:
        out = BinOp("+", out, t)
    return out


def mul(*factors: Node) -> Node:
    const = 1.0
    rest = []
    for f in factors:
        c = _const(f)
        if c is not None:
            const *= c
        else:
            rest.append(f)
    if const == 0.0:
        return ZERO
    if const != 1.0 or not rest:
        rest.insert(0, Num(const))
    out = rest[0]
    for f in rest[1:]:
        out = BinOp("*", out, f)
    return out


def hc_multiply(gamma: np.ndarray, u: Sequence[Node], v: Sequence[Node]) -> list:
    """Component trees of the product of two hypercomplex-valued trees."""
    n = gamma.shape[0]
    out = []
    for k in range(n):
        terms = [
            mul(Num(gamma[i, j, k]), u[i], v[j])
            for i in range(n)
            for j in range(n)
            if gamma[i, j, k] != 0.0
        ]
        out.append(add(*terms) if terms else ZERO)
    return out


def hc_add(u: Sequence[Node], v: Sequence[Node]) -> list:
    return [add(a, b) for a, b in zip(u, v)]


def hc_scale(u: Sequence[Node], c: float) -> list:
    return [mul(Num(c), a) for a in u]



def substitute(node: Node, mapping: Mapping[str, object]) -> Node:
    """Replace variables by trees, or rename them when mapped to a string."""
    if isinstance(node, Var):
        new = mapping.get(node.name, node)
        return Var(new, node.pos) if isinstance(new, str) else new
    if isinstance(node, Neg):
        return Neg(substitute(node.operand, mapping), node.pos)
    if isinstance(node, BinOp):
        return BinOp(node.op, substitute(node.left, mapping), substitute(node.right, mapping), node.pos)
    if isinstance(node, Call):
        return Call(node.func, substitute(node.arg, mapping), node.pos)
    return node
