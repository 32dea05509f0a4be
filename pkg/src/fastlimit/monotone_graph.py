"""Piecewise-linear maximal monotone graphs.

A graph is stored as an ordered list of knots ``(u, v_lo, v_hi)``. Between
consecutive knots the curve is the straight segment from ``(u_i, v_hi_i)`` to
``(u_{i+1}, v_lo_{i+1})``; a knot with ``v_lo < v_hi`` is a vertical segment
(a jump of the multivalued map). Outside the first and last knot the curve
continues as a ray of given slope, or the domain ends there. Extended values
are plain IEEE ``-inf``/``+inf``; they may only appear as the lower end of the
first knot or the upper end of the last knot, and never enter arithmetic
outside the table builders below.

Every operation accepts scalars or numpy arrays and returns the same kind.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from .errors import (
    DuplicateKnot,
    EmptyGraph,
    InconsistentSlope,
    MissingGrowthConstants,
    NonMonotone,
    OutOfDomain,
)

END = None  # tail marker: the domain of the graph stops at the outer knot


def _as_tail(t):
    if t is None or (isinstance(t, str) and t.lower() == "end"):
        return None
    t = float(t)
    if not math.isfinite(t) or t < 0:
        raise NonMonotone(f"tail slope must be finite and >= 0, got {t}")
    return t


def _scalar_out(x, like):
    return float(x) if np.ndim(like) == 0 else x


@dataclass(frozen=True)
class MonotoneGraph:
    """Validated piecewise-linear maximal monotone graph.

    Build instances with :func:`make_graph` or :func:`preset`; the
    constructor assumes already sorted, validated input.
    """

    u: tuple
    v_lo: tuple
    v_hi: tuple
    left_slope: float | None
    right_slope: float | None
    growth: tuple | None = None
    _U: np.ndarray = field(init=False, repr=False, compare=False)
    _VLO: np.ndarray = field(init=False, repr=False, compare=False)
    _VHI: np.ndarray = field(init=False, repr=False, compare=False)
    _SEG: np.ndarray = field(init=False, repr=False, compare=False)
    _tables: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        U = np.array(self.u, dtype=float)
        lo = np.array(self.v_lo, dtype=float)
        hi = np.array(self.v_hi, dtype=float)
        if len(U) > 1:
            seg = (lo[1:] - hi[:-1]) / np.diff(U)
        else:
            seg = np.zeros(0)
        object.__setattr__(self, "_U", U)
        object.__setattr__(self, "_VLO", lo)
        object.__setattr__(self, "_VHI", hi)
        object.__setattr__(self, "_SEG", seg)
        object.__setattr__(self, "_tables", {})

    # -- basic geometry -------------------------------------------------

    @property
    def knots(self):
        return list(zip(self.u, self.v_lo, self.v_hi))

    @property
    def segment_slopes(self):
        return tuple(float(s) for s in self._SEG)

    @property
    def domain(self):
        """Closed domain ``(u_min, u_max)`` of the graph, possibly infinite."""
        lo = -math.inf if self.left_slope is not None else self.u[0]
        hi = math.inf if self.right_slope is not None else self.u[-1]
        return lo, hi

    @property
    def is_single_valued(self):
        return bool(np.all(self._VLO == self._VHI))

    def _s_table(self, lam):
        """Breakpoints of ``s = u + lam*v`` along the curve and the matching u."""
        key = float(lam)
        tab = self._tables.get(key)
        if tab is not None:
            return tab
        xs, us = [], []
        for ui, lo, hi in zip(self.u, self.v_lo, self.v_hi):
            for v in (lo, hi):
                if math.isinf(v):
                    continue
                s = ui + lam * v
                if xs and s == xs[-1]:
                    continue
                xs.append(s)
                us.append(ui)
        tab = (np.array(xs), np.array(us))
        self._tables[key] = tab
        return tab

    # -- evaluation -----------------------------------------------------

    def resolvent(self, lam, s):
        """Return the unique u with ``s in u + lam*alpha(u)``."""
        if not lam > 0:
            raise ValueError(f"lambda must be > 0, got {lam}")
        s_arr = np.asarray(s, dtype=float)
        xs, us = self._s_table(lam)
        if len(xs) == 0:
            # the whole vertical line u = u[0]
            return _scalar_out(np.full_like(s_arr, self.u[0]), s)
        out = np.interp(s_arr, xs, us)
        left = s_arr < xs[0]
        if np.any(left):
            if math.isinf(self.v_lo[0]):
                pass  # vertical ray down: np.interp already returns u[0]
            elif self.left_slope is None:
                raise OutOfDomain(f"s={s_arr[left].min()} below the range of I+{lam}*alpha")
            else:
                out = np.where(left, us[0] + (s_arr - xs[0]) / (1.0 + lam * self.left_slope), out)
        right = s_arr > xs[-1]
        if np.any(right):
            if math.isinf(self.v_hi[-1]):
                pass
            elif self.right_slope is None:
                raise OutOfDomain(f"s={s_arr[right].max()} above the range of I+{lam}*alpha")
            else:
                out = np.where(right, us[-1] + (s_arr - xs[-1]) / (1.0 + lam * self.right_slope), out)
        return _scalar_out(out, s)

    def section(self, u, clip=False):
        """Return ``(v_lo, v_hi)`` bounding the set alpha(u).

        With ``clip=True`` points outside a bounded domain are moved to the
        nearest domain end instead of raising :class:`OutOfDomain`.
        """
        u_arr = np.asarray(u, dtype=float)
        U, LO, HI = self._U, self._VLO, self._VHI
        n = len(U)
        if clip:
            dmin, dmax = self.domain
            u_arr = np.clip(u_arr, dmin, dmax)
        idx = np.searchsorted(U, u_arr, side="left")
        inner = np.clip(idx, 1, max(n - 1, 1))
        at_knot = (idx < n) & (U[np.minimum(idx, n - 1)] == u_arr)
        with np.errstate(invalid="ignore"):
            if n > 1:
                j = inner - 1
                mid = HI[j] + (u_arr - U[j]) * self._SEG[j]
            else:
                mid = np.full_like(u_arr, np.nan)
            below = (idx == 0) & ~at_knot
            above = idx >= n
            if np.any(below):
                if self.left_slope is None:
                    raise OutOfDomain(f"u={u_arr[below].min()} outside the graph domain")
                mid = np.where(below, LO[0] + self.left_slope * (u_arr - U[0]), mid)
            if np.any(above):
                if self.right_slope is None:
                    raise OutOfDomain(f"u={u_arr[above].max()} outside the graph domain")
                mid = np.where(above, HI[-1] + self.right_slope * (u_arr - U[-1]), mid)
        k = np.minimum(idx, n - 1)
        lo = np.where(at_knot, LO[k], mid)
        hi = np.where(at_knot, HI[k], mid)
        if np.ndim(u) == 0:
            return float(lo), float(hi)
        return lo, hi

    def selection(self, u, clip=False):
        """Minimal-norm selection: the point of alpha(u) nearest to zero."""
        lo, hi = self.section(u, clip=clip)
        out = np.minimum(np.maximum(0.0, lo), hi)
        return _scalar_out(out, u)

    def slope_right(self, u):
        """Right derivative of a single-valued graph (vertical parts ignored)."""
        u_arr = np.asarray(u, dtype=float)
        U = self._U
        n = len(U)
        idx = np.searchsorted(U, u_arr, side="right")
        left = self.left_slope if self.left_slope is not None else 0.0
        right = self.right_slope if self.right_slope is not None else 0.0
        seg = np.concatenate(([left], self._SEG, [right]))
        out = seg[np.clip(idx, 0, n)]
        return _scalar_out(out, u)

    def single_valued(self, u):
        """Evaluate a single-valued graph (the section's lower end)."""
        lo, _ = self.section(u)
        return lo


# -- construction ---------------------------------------------------------


def make_graph(knots, slopes=None, tails=(END, END), growth=None) -> MonotoneGraph:
    """Validate raw data and build a :class:`MonotoneGraph`.

    Parameters
    ----------
    knots : sequence of (u, v_lo, v_hi)
        ``v_lo == v_hi`` for an ordinary point, ``v_lo < v_hi`` for a jump.
        Only the first knot may have ``v_lo = -inf`` and only the last may
        have ``v_hi = +inf``.
    slopes : sequence of float, optional
        Segment slopes between consecutive knots. They are implied by the
        knots; when given they are checked for sign and consistency.
    tails : (left, right)
        Slope (>= 0) of the outer rays, or ``None`` / ``"end"`` when the
        domain stops at the outer knot.
    growth : (C1, C2, C3, C4), optional
        Linear growth constants, all > 0.
    """
    raw = [tuple(float(x) for x in k) for k in knots]
    if not raw:
        raise EmptyGraph("a graph needs at least one knot")
    for k in raw:
        if len(k) != 3:
            raise ValueError(f"knot must be (u, v_lo, v_hi), got {k}")
        if any(math.isnan(x) for x in k) or not math.isfinite(k[0]):
            raise ValueError(f"knot coordinates must be numbers, got {k}")
    order = sorted(range(len(raw)), key=lambda i: raw[i][0])
    if slopes is not None and order != list(range(len(raw))):
        raise ValueError("knots must be given in increasing u when slopes are supplied")
    raw = [raw[i] for i in order]
    for a, b in zip(raw, raw[1:]):
        if a[0] == b[0]:
            raise DuplicateKnot(f"duplicate knot at u={a[0]}")
    left, right = (_as_tail(t) for t in tails)
    n = len(raw)
    for i, (u, lo, hi) in enumerate(raw):
        if lo > hi:
            raise NonMonotone(f"knot at u={u} has v_lo > v_hi")
        if hi == -math.inf or lo == math.inf:
            raise NonMonotone(f"knot at u={u} has an empty section")
        if lo == -math.inf and (i > 0 or left is not None):
            raise NonMonotone(f"v_lo=-inf only allowed at the first knot with an ended left tail")
        if hi == math.inf and (i < n - 1 or right is not None):
            raise NonMonotone(f"v_hi=+inf only allowed at the last knot with an ended right tail")
    for a, b in zip(raw, raw[1:]):
        if a[2] > b[1]:
            raise NonMonotone(f"curve decreases between u={a[0]} and u={b[0]}")
    if slopes is not None:
        slopes = [float(s) for s in slopes]
        if len(slopes) != n - 1:
            raise ValueError(f"expected {n - 1} slopes, got {len(slopes)}")
        for s, a, b in zip(slopes, raw, raw[1:]):
            if s < 0:
                raise NonMonotone(f"negative segment slope {s}")
            implied = (b[1] - a[2]) / (b[0] - a[0])
            if abs(implied - s) > 1e-12 * max(1.0, abs(s)):
                raise InconsistentSlope(
                    f"slope {s} between u={a[0]} and u={b[0]} disagrees with knots ({implied})"
                )
    if growth is not None:
        growth = tuple(float(c) for c in growth)
        if len(growth) != 4 or not all(c > 0 for c in growth):
            raise ValueError("growth must be four positive constants (C1, C2, C3, C4)")
    return MonotoneGraph(
        u=tuple(k[0] for k in raw),
        v_lo=tuple(k[1] for k in raw),
        v_hi=tuple(k[2] for k in raw),
        left_slope=left,
        right_slope=right,
        growth=growth,
    )


def identity_graph(growth=None):
    return make_graph([(0.0, 0.0, 0.0)], tails=(1.0, 1.0), growth=growth)


def zero_graph(growth=None):
    return make_graph([(0.0, 0.0, 0.0)], tails=(0.0, 0.0), growth=growth)


def heaviside_graph():
    """{0} x (-inf, 0] followed by the ray v = 0, u > 0."""
    return make_graph([(0.0, -math.inf, 0.0)], tails=(END, 0.0))


def linear_graph(rate):
    rate = float(rate)
    if not rate >= 0:
        raise NonMonotone(f"linear graph needs rate >= 0, got {rate}")
    return make_graph([(0.0, 0.0, 0.0)], tails=(rate, rate))


def preset(name: str) -> MonotoneGraph:
    """Named graph: ``identity``, ``zero``, ``heaviside`` or ``linear:r``."""
    key = name.strip().lower()
    if key == "identity":
        return identity_graph()
    if key == "zero":
        return zero_graph()
    if key in ("heaviside", "evans", "stefan"):
        return heaviside_graph()
    if key.startswith("linear:"):
        return linear_graph(key.split(":", 1)[1])
    raise ValueError(f"unknown graph preset {name!r}")


def graph_from_config(block) -> MonotoneGraph:
    """Build a graph from a preset name or a literal config table."""
    if isinstance(block, str):
        return preset(block)
    if "preset" in block:
        g = preset(block["preset"])
        if "growth" in block:
            g = make_graph(g.knots, tails=(g.left_slope, g.right_slope), growth=block["growth"])
        return g
    try:
        knots = block["knots"]
    except KeyError as exc:
        raise ValueError("graph table needs 'knots' or 'preset'") from exc
    tails = (block.get("left_tail", "end"), block.get("right_tail", "end"))
    return make_graph(knots, block.get("slopes"), tails, block.get("growth"))


# -- module-level operations --------------------------------------------


def resolvent(g: MonotoneGraph, lam, s):
    return g.resolvent(lam, s)


def yosida(g: MonotoneGraph, delta, s):
    """Yosida approximation ``(s - (I + delta*alpha)^{-1} s) / delta``."""
    if not delta > 0:
        raise ValueError(f"delta must be > 0, got {delta}")
    s_arr = np.asarray(s, dtype=float)
    out = (s_arr - np.asarray(g.resolvent(delta, s_arr))) / delta
    return _scalar_out(out, s)


def section(g: MonotoneGraph, u):
    return g.section(u)


def beta_of(g: MonotoneGraph, d1, d2, s):
    """``d2*s + (d1 - d2) * (I + alpha)^{-1} s``."""
    _check_diffusivities(d1, d2)
    s_arr = np.asarray(s, dtype=float)
    out = d2 * s_arr + (d1 - d2) * np.asarray(g.resolvent(1.0, s_arr))
    return _scalar_out(out, s)


def limit_pair(g: MonotoneGraph, z):
    """Split z into (u*, v*) with u* = (I+alpha)^{-1} z and v* = z - u*."""
    z_arr = np.asarray(z, dtype=float)
    u = np.asarray(g.resolvent(1.0, z_arr))
    v = z_arr - u
    if np.ndim(z) == 0:
        return float(u), float(v)
    return u, v


def _check_diffusivities(d1, d2):
    if not d1 > 0:
        raise ValueError(f"d1 must be > 0, got {d1}")
    if not d2 >= 0:
        raise ValueError(f"d2 must be >= 0, got {d2}")


def beta_graph(g: MonotoneGraph, d1, d2) -> MonotoneGraph:
    """The single-valued piecewise-linear map beta as a graph of its own.

    Knots sit at the breakpoints of the resolvent. Having beta as a graph
    gives exact scalar solves of ``w + lam*beta(w) = r`` through its
    resolvent.
    """
    _check_diffusivities(d1, d2)
    xs, _ = g._s_table(1.0)
    vals = d2 * xs + (d1 - d2) * np.asarray(g.resolvent(1.0, xs))

    def tail(slope, end_infinite):
        if end_infinite:
            return float(d2)
        if slope is None:
            return END
        return float(d2 + (d1 - d2) / (1.0 + slope))

    left = tail(g.left_slope, math.isinf(g.v_lo[0]))
    right = tail(g.right_slope, math.isinf(g.v_hi[-1]))
    knots = [(float(x), float(b), float(b)) for x, b in zip(xs, vals)]
    # consecutive values can tie up to rounding on flat pieces
    for i in range(1, len(knots)):
        if knots[i][1] < knots[i - 1][1]:
            knots[i] = (knots[i][0], knots[i - 1][1], knots[i - 1][1])
    return make_graph(knots, tails=(left, right))


def inverse_graph(g: MonotoneGraph) -> MonotoneGraph:
    """Swap the coordinates of the graph: the result represents alpha^{-1}."""
    pts = []
    for ui, lo, hi in zip(g.u, g.v_lo, g.v_hi):
        pts.append((ui, lo))
        if hi != lo:
            pts.append((ui, hi))
    # tails of the inverse
    if g.left_slope is None:
        if math.isinf(g.v_lo[0]):
            pts = pts[1:]
            new_left = 0.0
        else:
            new_left = END
    elif g.left_slope == 0.0:
        pts.insert(0, (-math.inf, g.v_lo[0]))
        new_left = END
    else:
        new_left = 1.0 / g.left_slope
    if g.right_slope is None:
        if math.isinf(g.v_hi[-1]):
            pts = pts[:-1]
            new_right = 0.0
        else:
            new_right = END
    elif g.right_slope == 0.0:
        pts.append((math.inf, g.v_hi[-1]))
        new_right = END
    else:
        new_right = 1.0 / g.right_slope
    swapped = [(b, a) for a, b in pts]
    knots = []
    for v, u in swapped:
        if knots and knots[-1][0] == v:
            knots[-1] = (v, knots[-1][1], u)
        else:
            knots.append((v, u, u))
    return make_graph(knots, tails=(new_left, new_right), growth=_inverse_growth(g.growth))


def _inverse_growth(growth):
    if growth is None:
        return None
    c1, c2, c3, c4 = growth
    return (1.0 / c3, c4 / c3, 1.0 / c1, c2 / c1)


class GrowthCheck(NamedTuple):
    passed: bool
    witness: tuple | None
    worst: float


def check_growth(g: MonotoneGraph, u_range: Sequence[float], n_samples: int = 1001) -> GrowthCheck:
    """Scan ``C1|u| - C2 <= |v| <= C3|u| + C4`` over points of the curve.

    Samples ``n_samples`` values of u in ``u_range`` plus every knot inside
    it. At each u the whole section is checked; infinite section ends cannot
    be sampled and are skipped. The witness is the worst violating (u, v).
    """
    if g.growth is None:
        raise MissingGrowthConstants("graph has no growth constants")
    c1, c2, c3, c4 = g.growth
    u_min, u_max = float(u_range[0]), float(u_range[1])
    if u_min > u_max:
        raise ValueError("u_range must be ordered")
    if u_min == u_max:
        us = np.array([u_min])
    else:
        us = np.linspace(u_min, u_max, max(int(n_samples), 2))
        inside = [x for x in g.u if u_min <= x <= u_max]
        us = np.unique(np.concatenate([us, inside]))
    lo, hi = g.section(us)
    lo, hi = np.atleast_1d(lo), np.atleast_1d(hi)
    contains_zero = (lo <= 0) & (hi >= 0)
    fin_lo = np.where(np.isfinite(lo), lo, np.nan)
    fin_hi = np.where(np.isfinite(hi), hi, np.nan)
    # smallest |v| in the section, and the v attaining it
    v_small = np.where(contains_zero, 0.0, np.where(np.abs(lo) < np.abs(hi), lo, hi))
    with np.errstate(invalid="ignore"):
        big_lo = np.abs(fin_lo)
        big_hi = np.abs(fin_hi)
        v_big = np.where(np.nan_to_num(big_lo, nan=-1) >= np.nan_to_num(big_hi, nan=-1), fin_lo, fin_hi)
    lower_gap = c1 * np.abs(us) - c2 - np.abs(v_small)
    upper_gap = np.nan_to_num(np.abs(v_big) - c3 * np.abs(us) - c4, nan=-np.inf)
    worst_lower = int(np.argmax(lower_gap))
    worst_upper = int(np.argmax(upper_gap))
    if lower_gap[worst_lower] >= upper_gap[worst_upper]:
        worst = float(lower_gap[worst_lower])
        witness = (float(us[worst_lower]), float(v_small[worst_lower]))
    else:
        worst = float(upper_gap[worst_upper])
        witness = (float(us[worst_upper]), float(v_big[worst_upper]))
    if worst > 0:
        return GrowthCheck(False, witness, worst)
    return GrowthCheck(True, None, worst)
