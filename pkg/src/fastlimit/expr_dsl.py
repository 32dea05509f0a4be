"""A tiny arithmetic expression language for reaction terms and initial data.

Grammar (precedence low to high, binary operators left associative)::

    expr   := expr ('+' | '-') term | term
    term   := term ('*' | '/') unary | unary
    unary  := '-' unary | atom
    atom   := NUMBER | NAME | NAME '(' expr (',' expr)* ')' | '(' expr ')'

Variables are ``u`` and ``v`` by default; initial-data expressions use ``x``.
The constant ``pi`` is always available. Functions: ``min``, ``max`` (two or
more arguments), ``abs``, ``pospart`` (max(z, 0)), ``negpart`` (max(-z, 0)),
``cos``, ``sin``, ``exp``.

Expressions evaluate on floats or numpy arrays alike.
"""
from __future__ import annotations

import functools
import math
import re
from dataclasses import dataclass

import numpy as np

DEFAULT_GUARD = 1e-12

FUNCTIONS = {
    "min": (2, None),
    "max": (2, None),
    "abs": (1, 1),
    "pospart": (1, 1),
    "negpart": (1, 1),
    "cos": (1, 1),
    "sin": (1, 1),
    "exp": (1, 1),
}
CONSTANTS = {"pi": math.pi}


class ExprError(ValueError):
    def __init__(self, message, offset=None):
        if offset is not None:
            message = f"{message} (at byte offset {offset})"
        super().__init__(message)
        self.offset = offset


class ExprSyntaxError(ExprError):
    pass


class UnknownIdentifier(ExprError):
    pass


class UnbalancedParen(ExprError):
    pass


class DivisionNearZero(ExprError, ArithmeticError):
    pass


# -- AST ------------------------------------------------------------------


class Expr:
    """Base class of expression nodes. Nodes are immutable and hashable."""

    def __call__(self, u=0.0, v=0.0, **env):
        env.setdefault("u", u)
        env.setdefault("v", v)
        return self._compiled(env)

    @functools.cached_property
    def _compiled(self):
        return _compile(self)

    @property
    def free_variables(self):
        return _free_vars(self)

    def __str__(self):
        return to_source(self)


@dataclass(frozen=True, eq=True)
class Num(Expr):
    value: float


@dataclass(frozen=True, eq=True)
class Var(Expr):
    name: str


@dataclass(frozen=True, eq=True)
class Neg(Expr):
    arg: Expr


@dataclass(frozen=True, eq=True)
class BinOp(Expr):
    op: str
    left: Expr
    right: Expr
    guard: float = DEFAULT_GUARD


@dataclass(frozen=True, eq=True)
class Call(Expr):
    name: str
    args: tuple


def _free_vars(e):
    if isinstance(e, Var):
        return {e.name}
    if isinstance(e, Num):
        return set()
    if isinstance(e, Neg):
        return _free_vars(e.arg)
    if isinstance(e, BinOp):
        return _free_vars(e.left) | _free_vars(e.right)
    return set().union(*(_free_vars(a) for a in e.args))


# -- tokenizer ------------------------------------------------------------

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)|(?P<name>[A-Za-z_][A-Za-z_0-9]*)|(?P<op>[-+*/(),]))"
)


def _byte_offset(src, i):
    return len(src[:i].encode("utf-8"))


def _tokenize(src):
    toks = []
    pos = 0
    n = len(src)
    while True:
        while pos < n and src[pos].isspace():
            pos += 1
        if pos >= n:
            break
        m = _TOKEN.match(src, pos)
        if m is None or m.end() == pos:
            raise ExprSyntaxError(f"unexpected character {src[pos]!r}", _byte_offset(src, pos))
        kind = m.lastgroup
        start = m.start(kind)
        toks.append((kind, m.group(kind), _byte_offset(src, start)))
        pos = m.end()
    toks.append(("eof", "", _byte_offset(src, n)))
    return toks


# -- Pratt parser -----------------------------------------------------------

_INFIX = {"+": 10, "-": 10, "*": 20, "/": 20}
_PREFIX_BP = 30


class _Parser:
    def __init__(self, src, variables, guard):
        self.toks = _tokenize(src)
        self.i = 0
        self.variables = frozenset(variables)
        self.guard = guard
        self.depth = 0

    def peek(self):
        return self.toks[self.i]

    def advance(self):
        tok = self.toks[self.i]
        self.i += 1
        return tok

    def parse(self):
        e = self.expr(0)
        kind, text, off = self.peek()
        if kind != "eof":
            if text == ")":
                raise UnbalancedParen("unmatched ')'", off)
            raise ExprSyntaxError(f"unexpected token {text!r}", off)
        return e

    def expr(self, min_bp):
        left = self.prefix()
        while True:
            kind, text, _ = self.peek()
            if kind != "op" or text not in _INFIX:
                break
            bp = _INFIX[text]
            if bp <= min_bp:
                break
            self.advance()
            right = self.expr(bp)
            left = BinOp(text, left, right, self.guard) if text == "/" else BinOp(text, left, right)
        return left

    def prefix(self):
        kind, text, off = self.advance()
        if kind == "num":
            return Num(float(text))
        if kind == "name":
            return self.name(text, off)
        if kind == "op" and text == "-":
            return Neg(self.expr_prefix_operand())
        if kind == "op" and text == "(":
            e = self.expr(0)
            k2, t2, o2 = self.advance()
            if t2 != ")":
                if k2 == "eof":
                    raise UnbalancedParen("missing ')'", o2)
                raise ExprSyntaxError(f"expected ')' but found {t2!r}", o2)
            return e
        if kind == "eof":
            raise ExprSyntaxError("unexpected end of input", off)
        if text == ")":
            raise UnbalancedParen("unmatched ')'", off)
        raise ExprSyntaxError(f"unexpected token {text!r}", off)

    def expr_prefix_operand(self):
        # unary minus binds tighter than every binary operator
        return self.expr(_PREFIX_BP)

    def name(self, text, off):
        if self.peek()[1] == "(":
            if text not in FUNCTIONS:
                raise UnknownIdentifier(f"unknown function {text!r}", off)
            self.advance()
            args = [self.expr(0)]
            while self.peek()[1] == ",":
                self.advance()
                args.append(self.expr(0))
            k2, t2, o2 = self.advance()
            if t2 != ")":
                if k2 == "eof":
                    raise UnbalancedParen("missing ')'", o2)
                raise ExprSyntaxError(f"expected ')' but found {t2!r}", o2)
            lo, hi = FUNCTIONS[text]
            if len(args) < lo or (hi is not None and len(args) > hi):
                raise ExprSyntaxError(f"{text} takes {lo if hi == lo else f'>= {lo}'} arguments", off)
            return Call(text, tuple(args))
        if text in self.variables:
            return Var(text)
        if text in CONSTANTS:
            return Num(CONSTANTS[text])
        raise UnknownIdentifier(f"unknown identifier {text!r}", off)


def parse(src: str, variables=("u", "v"), guard: float = DEFAULT_GUARD) -> Expr:
    """Parse ``src`` into an expression tree."""
    if isinstance(src, bytes):
        src = src.decode("utf-8")
    return _Parser(src, variables, guard).parse()


# -- printing ---------------------------------------------------------------


def to_source(e: Expr) -> str:
    """Canonical, fully parenthesized source text; ``parse(to_source(e)) == e``."""
    if isinstance(e, Num):
        if e.value < 0 or math.isinf(e.value) or math.isnan(e.value):
            raise ValueError(f"literal {e.value} has no source form")
        return repr(e.value)
    if isinstance(e, Var):
        return e.name
    if isinstance(e, Neg):
        return f"(-{to_source(e.arg)})"
    if isinstance(e, BinOp):
        return f"({to_source(e.left)} {e.op} {to_source(e.right)})"
    return f"{e.name}({', '.join(to_source(a) for a in e.args)})"


# -- evaluation ---------------------------------------------------------------


def _divide(a, b, guard):
    if np.any(np.abs(b) < guard):
        raise DivisionNearZero(f"denominator below guard {guard}")
    return a / b


_UNARY = {
    "abs": np.abs,
    "pospart": lambda z: np.maximum(z, 0.0),
    "negpart": lambda z: np.maximum(-z, 0.0),
    "cos": np.cos,
    "sin": np.sin,
    "exp": np.exp,
}


def _compile(e):
    if isinstance(e, Num):
        val = e.value
        return lambda env: val
    if isinstance(e, Var):
        name = e.name
        return lambda env: env[name]
    if isinstance(e, Neg):
        f = _compile(e.arg)
        return lambda env: -f(env)
    if isinstance(e, BinOp):
        fl, fr = _compile(e.left), _compile(e.right)
        if e.op == "+":
            return lambda env: fl(env) + fr(env)
        if e.op == "-":
            return lambda env: fl(env) - fr(env)
        if e.op == "*":
            return lambda env: fl(env) * fr(env)
        guard = e.guard
        return lambda env: _divide(fl(env), fr(env), guard)
    fs = [_compile(a) for a in e.args]
    if e.name in ("min", "max"):
        red = np.minimum if e.name == "min" else np.maximum

        def call(env):
            out = fs[0](env)
            for f in fs[1:]:
                out = red(out, f(env))
            return out

        return call
    g = _UNARY[e.name]
    f0 = fs[0]
    return lambda env: g(f0(env))


def evaluate(e: Expr, u=0.0, v=0.0, **env):
    """Evaluate ``e`` at the given variable values (floats or arrays)."""
    out = e(u, v, **env)
    if np.ndim(out) == 0:
        return float(out)
    return out


def lipschitz_estimate(e: Expr, box, n: int = 101) -> float:
    """Largest difference quotient of ``e`` over an ``n x n`` grid.

    ``box`` is ``(u_min, u_max, v_min, v_max)``. Quotients are taken between
    neighbouring grid points along each axis, so the result is a lower bound
    of the true Lipschitz constant on the box.
    """
    if n < 2:
        raise ValueError("n must be >= 2")
    u0, u1, v0, v1 = (float(b) for b in box)
    us = np.linspace(u0, u1, n)
    vs = np.linspace(v0, v1, n)
    U, V = np.meshgrid(us, vs, indexing="ij")
    vals = np.broadcast_to(np.asarray(e(U, V), dtype=float), U.shape)
    best = 0.0
    if u1 > u0:
        best = max(best, float(np.max(np.abs(np.diff(vals, axis=0))) / (us[1] - us[0])))
    if v1 > v0:
        best = max(best, float(np.max(np.abs(np.diff(vals, axis=1))) / (vs[1] - vs[0])))
    return best
