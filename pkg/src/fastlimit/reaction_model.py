"""Reaction terms F, system data, the limit reaction f and initial data."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, NamedTuple

import numpy as np

from . import expr_dsl
from .monotone_graph import MonotoneGraph, heaviside_graph, limit_pair, linear_graph


def canonical_F(g: MonotoneGraph, u, v):
    """``u - (I + alpha)^{-1}(u + v)``: zero exactly on the graph of alpha."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    out = u - np.asarray(g.resolvent(1.0, u + v))
    return float(out) if out.ndim == 0 else out


def _evans_piecewise(u, w):
    # uv on the positive quadrant, min(u, w) elsewhere
    both = (u >= 0) & (w >= 0)
    return np.where(both, u * w, np.minimum(u, w))


def evans_F(u, v):
    """Irreversible product reaction written in reversible form.

    The classical rate ``u*w`` for two consumed species is replaced outside
    the positive quadrant by ``min(u, w)`` so that it becomes monotone, then
    evaluated at ``w = -v``. The result is nondecreasing in u, nonincreasing
    in v, and vanishes exactly on the Heaviside graph
    ``{0} x (-inf, 0]  U  [0, inf) x {0}``.
    """
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    out = _evans_piecewise(u, -v)
    return float(out) if out.ndim == 0 else out


def linear_F(rate, u, v):
    """Reversible first-order exchange ``rate*u - v``."""
    out = rate * np.asarray(u, dtype=float) - np.asarray(v, dtype=float)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class ReactionTerm:
    """A fast reaction term F together with its graph and Lipschitz bound.

    ``kind`` is one of ``canonical``, ``evans``, ``linear`` or ``custom``.
    """

    kind: str
    graph: MonotoneGraph
    lipschitz_bound: float
    rate: float | None = None
    expr: expr_dsl.Expr | None = None

    def __call__(self, u, v):
        if self.kind == "canonical":
            return canonical_F(self.graph, u, v)
        if self.kind == "evans":
            return evans_F(u, v)
        if self.kind == "linear":
            return linear_F(self.rate, u, v)
        return expr_dsl.evaluate(self.expr, u, v)

    @classmethod
    def canonical(cls, g: MonotoneGraph):
        return cls("canonical", g, 2.0)

    @classmethod
    def evans(cls, lipschitz_bound=None, box=(-10.0, 10.0, -10.0, 10.0)):
        if lipschitz_bound is None:
            # not globally Lipschitz; the bound only holds on the box
            lipschitz_bound = _estimate(evans_F, box)
        return cls("evans", heaviside_graph(), float(lipschitz_bound))

    @classmethod
    def linear(cls, rate):
        rate = float(rate)
        return cls("linear", linear_graph(rate), rate + 1.0, rate=rate)

    @classmethod
    def custom(cls, src, g: MonotoneGraph, lipschitz_bound=None, box=(-10.0, 10.0, -10.0, 10.0)):
        e = src if isinstance(src, expr_dsl.Expr) else expr_dsl.parse(src)
        if lipschitz_bound is None:
            lipschitz_bound = expr_dsl.lipschitz_estimate(e, box, 101)
        return cls("custom", g, float(lipschitz_bound), expr=e)


def _estimate(fn, box, n=101):
    us = np.linspace(box[0], box[1], n)
    vs = np.linspace(box[2], box[3], n)
    U, V = np.meshgrid(us, vs, indexing="ij")
    vals = fn(U, V)
    du = np.max(np.abs(np.diff(vals, axis=0))) / (us[1] - us[0])
    dv = np.max(np.abs(np.diff(vals, axis=1))) / (vs[1] - vs[0])
    return float(max(du, dv))


def reaction_from_config(kind: str, g: MonotoneGraph, lipschitz_bound=None) -> ReactionTerm:
    """``canonical``, ``evans``, ``linear:r`` or ``custom:<expr>``."""
    key = kind.strip()
    low = key.lower()
    if low == "canonical":
        return ReactionTerm.canonical(g)
    if low == "evans":
        return ReactionTerm.evans(lipschitz_bound)
    if low.startswith("linear:"):
        return ReactionTerm.linear(key.split(":", 1)[1])
    if low.startswith("custom:"):
        return ReactionTerm.custom(key.split(":", 1)[1], g, lipschitz_bound)
    raise ValueError(f"unknown reaction kind {kind!r}")


def _as_rate(f) -> Callable:
    if f is None:
        return expr_dsl.Num(0.0)
    if isinstance(f, str):
        return expr_dsl.parse(f)
    if isinstance(f, (int, float)):
        return expr_dsl.Num(float(f))
    return f


def _is_zero(f):
    return isinstance(f, expr_dsl.Num) and f.value == 0.0


@dataclass(frozen=True)
class ReactionSystemSpec:
    """Data of the fast-reaction system: diffusivities, rate k, f1, f2, F."""

    d1: float
    d2: float
    k: float
    F: ReactionTerm
    f1: Callable = field(default_factory=lambda: expr_dsl.Num(0.0))
    f2: Callable = field(default_factory=lambda: expr_dsl.Num(0.0))

    def __post_init__(self):
        if not self.d1 > 0:
            raise ValueError(f"d1 must be > 0, got {self.d1}")
        if not self.d2 >= 0:
            raise ValueError(f"d2 must be >= 0, got {self.d2}")
        if not self.k >= 0:
            raise ValueError(f"k must be >= 0, got {self.k}")
        object.__setattr__(self, "f1", _as_rate(self.f1))
        object.__setattr__(self, "f2", _as_rate(self.f2))

    @property
    def alpha(self) -> MonotoneGraph:
        return self.F.graph

    @property
    def has_source(self):
        return not (_is_zero(self.f1) and _is_zero(self.f2))

    def with_k(self, k):
        return ReactionSystemSpec(self.d1, self.d2, k, self.F, self.f1, self.f2)

    def source(self, u, v):
        """Evaluate (f1, f2) as arrays broadcast to the shape of u."""
        shape = np.shape(u)
        a = np.broadcast_to(np.asarray(self.f1(u, v), dtype=float), shape)
        b = np.broadcast_to(np.asarray(self.f2(u, v), dtype=float), shape)
        return a, b


def f_limit(g: MonotoneGraph, f1, f2, s):
    """Limit source ``(f1 + f2)`` evaluated at the split ``limit_pair(g, s)``."""
    f1, f2 = _as_rate(f1), _as_rate(f2)
    us, vs = limit_pair(g, s)
    out = np.asarray(f1(us, vs), dtype=float) + np.asarray(f2(us, vs), dtype=float)
    if np.ndim(s) == 0:
        return float(out)
    return np.broadcast_to(out, np.shape(s)).copy()


def project_to_zero_set(g: MonotoneGraph, a, b):
    """Cellwise split of ``a + b`` onto the graph, keeping the sum."""
    s = np.asarray(a, dtype=float) + np.asarray(b, dtype=float)
    u0 = np.asarray(g.resolvent(1.0, s))
    return u0, s - u0


@dataclass
class InitialData:
    """Initial fields and the rule producing the k-dependent family.

    ``rule`` maps ``(k, u0, v0)`` to ``(u0_k, v0_k)``; ``None`` means the
    same data for every k.
    """

    u0: np.ndarray
    v0: np.ndarray
    h: float
    C5: float = 1.0
    C6: float = np.inf
    rule: Callable | None = None

    def family(self, k):
        if self.rule is None:
            return self.u0, self.v0
        return self.rule(k, self.u0, self.v0)


class InitCheck(NamedTuple):
    passed: bool
    max_residual: float
    max_F: float
    l2_sum: float
    laplacian_l1: float


def validate_initial_family(spec: ReactionSystemSpec, init: InitialData, k: float) -> InitCheck:
    """Check ``F(u0_k, v0_k) <= C5/k`` cellwise and the L2 bound by C6.

    ``max_residual`` is the largest excess over either bound (0 when both
    hold). The L1 norm of the discrete Neumann Laplacian of u0_k is reported
    but not enforced.
    """
    if not k > 0:
        raise ValueError("k must be > 0")
    u0k, v0k = init.family(k)
    Fv = np.asarray(spec.F(u0k, v0k), dtype=float)
    max_F = float(np.max(Fv))
    excess_F = max(0.0, max_F - init.C5 / k)
    l2 = float(np.sqrt(np.sum(u0k**2) * init.h) + np.sqrt(np.sum(v0k**2) * init.h))
    excess_l2 = max(0.0, l2 - init.C6)
    ghost = np.concatenate(([u0k[0]], u0k, [u0k[-1]]))
    lap = (ghost[:-2] - 2 * ghost[1:-1] + ghost[2:]) / init.h**2
    lap_l1 = float(np.sum(np.abs(lap)) * init.h)
    residual = max(excess_F, excess_l2)
    return InitCheck(residual == 0.0, residual, max_F, l2, lap_l1)
