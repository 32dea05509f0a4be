"""Time integration of the fast-reaction system on a 1D zero-flux grid.

Each step splits the system into a per-cell implicit reaction solve followed
by implicit diffusion of u and v. The reaction solve is unconditionally
stable in k, so dt is chosen for accuracy alone.
"""
from __future__ import annotations

import functools
from dataclasses import dataclass, replace
from typing import NamedTuple

import numpy as np

from .errors import Aborted, NoBracket, NoConvergence, NonFinite, OutOfDomain
from .grid import Diagnostics, Grid1D, Trajectory, lp_norm, step_count
from .monotone_graph import inverse_graph
from .reaction_model import ReactionSystemSpec
from .tridiag import ThomasFactor

DIAGNOSTIC_COLUMNS = (
    "t", "mass_u", "mass_v", "mass_sum", "l2_u", "l2_v", "linf_u", "linf_v", "D_alpha", "D_gamma",
)

_EPS = np.finfo(float).eps


# -- reaction ---------------------------------------------------------------


def _monotone_root(phi, lo, hi, tol, max_iter=400):
    """Elementwise root of a strictly increasing phi inside [lo, hi].

    Newton steps with a finite-difference slope, replaced by bisection
    whenever they leave the bracket or stall.
    """
    flo = phi(lo)
    fhi = phi(hi)
    width = np.maximum(hi - lo, 1e-6 * (1.0 + np.abs(lo)))
    for _ in range(200):
        bad_lo = flo > 0
        bad_hi = fhi < 0
        if not (np.any(bad_lo) or np.any(bad_hi)):
            break
        lo = np.where(bad_lo, lo - width, lo)
        hi = np.where(bad_hi, hi + width, hi)
        flo, fhi = phi(lo), phi(hi)
        width = width * 2.0
        if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
            break
    if np.any(flo > 0) or np.any(fhi < 0):
        raise NoBracket("could not bracket the reaction root")
    w = np.where(np.abs(flo) <= np.abs(fhi), lo, hi)
    for it in range(max_iter):
        f = phi(w)
        if not np.all(np.isfinite(f)):
            raise NonFinite("non-finite value in reaction solve")
        done = (np.abs(f) <= tol) | (hi - lo <= 4.0 * _EPS * (1.0 + np.abs(w)))
        if np.all(done):
            return w
        lo = np.where(f < 0, w, lo)
        hi = np.where(f > 0, w, hi)
        step = 1e-7 * (1.0 + np.abs(w))
        slope = (phi(w + step) - phi(w - step)) / (2.0 * step)
        with np.errstate(divide="ignore", invalid="ignore"):
            newton = w - f / slope
        ok = (slope > 0) & np.isfinite(newton) & (newton > lo) & (newton < hi)
        if it % 4 == 3:
            ok[:] = False  # periodic bisection guarantees bracket shrinkage
        w = np.where(done, w, np.where(ok, newton, 0.5 * (lo + hi)))
    raise NoConvergence(max_iter, float(np.max(np.abs(phi(w)))))


def reaction_substep(spec: ReactionSystemSpec, u, v, dt):
    """Implicit reaction step on whole arrays; returns ``(u', v')``.

    Solves ``u' = u + dt*f1(u,v) - dt*k*F(u',v')`` and
    ``v' = v + dt*f2(u,v) + dt*k*F(u',v')``. The sum ``u'+v'`` is known in
    advance, which leaves one strictly increasing scalar equation per cell.
    """
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if spec.has_source:
        f1, f2 = spec.source(u, v)
        a = u + dt * f1
        b = v + dt * f2
    else:
        a, b = u, v
    s = a + b
    kk = dt * spec.k
    if kk == 0:
        return a.copy(), b.copy()
    F = spec.F
    if F.kind == "canonical":
        J = np.asarray(F.graph.resolvent(1.0, s))
        w = (a + kk * J) / (1.0 + kk)
    elif F.kind == "linear":
        w = (a + kk * s) / (1.0 + kk * (1.0 + F.rate))
    else:
        def phi(w):
            return w + kk * np.asarray(F(w, s - w)) - a

        try:
            J = np.asarray(F.graph.resolvent(1.0, s))
        except OutOfDomain:
            J = a
        lo = np.minimum(a, J)
        hi = np.maximum(a, J)
        w = _monotone_root(phi, lo, hi, 1e-12 * (1.0 + np.abs(s)))
    if not np.all(np.isfinite(w)):
        raise NonFinite("non-finite value after reaction substep")
    return w, s - w


def reaction_substep_cell(spec: ReactionSystemSpec, u: float, v: float, dt: float):
    """Scalar version of :func:`reaction_substep`."""
    un, vn = reaction_substep(spec, np.array([u]), np.array([v]), dt)
    return float(un[0]), float(vn[0])


# -- diffusion ----------------------------------------------------------------


@functools.lru_cache(maxsize=64)
def _diffusion_factor(n, lam):
    lower = np.full(n, -lam)
    upper = np.full(n, -lam)
    diag = np.full(n, 1.0 + 2.0 * lam)
    diag[0] = diag[-1] = 1.0 + lam
    return ThomasFactor(lower, diag, upper)


def diffusion_substep(field, d, dt, grid: Grid1D):
    """Implicit Euler step of ``w_t = d * w_xx`` with zero-flux ends."""
    field = np.asarray(field, dtype=float)
    if d < 0 or dt <= 0:
        raise ValueError("need d >= 0 and dt > 0")
    if d == 0:
        return field.copy()
    out = _diffusion_factor(grid.n_cells, dt * d / grid.h**2).solve(field)
    if not np.all(np.isfinite(out)):
        raise NonFinite("non-finite value after diffusion substep")
    return out


# -- stepping -----------------------------------------------------------------


@dataclass(frozen=True)
class RDState:
    t: float
    u: np.ndarray
    v: np.ndarray
    D_alpha: float = 0.0
    D_gamma: float = 0.0


class _Selections(NamedTuple):
    alpha: object
    gamma: object


@functools.lru_cache(maxsize=32)
def _selections(graph):
    return _Selections(graph, inverse_graph(graph))


def _react(state, spec, grid, dt, sel):
    u, v = reaction_substep(spec, state.u, state.v, dt)
    if spec.k == 0:
        return replace(state, u=u, v=v)
    Fv = np.asarray(spec.F(u, v), dtype=float)
    a0 = np.asarray(sel.alpha.selection(u, clip=True))
    g0 = np.asarray(sel.gamma.selection(v, clip=True))
    w = spec.k * grid.h * dt
    return replace(
        state,
        u=u,
        v=v,
        D_alpha=state.D_alpha + w * float(np.sum(Fv * (a0 - v))),
        D_gamma=state.D_gamma + w * float(np.sum(Fv * (u - g0))),
    )


def _diffuse(state, spec, grid, dt):
    return replace(
        state,
        u=diffusion_substep(state.u, spec.d1, dt, grid),
        v=diffusion_substep(state.v, spec.d2, dt, grid),
    )


def step_rd(state: RDState, spec: ReactionSystemSpec, grid: Grid1D, dt: float, splitting="lie") -> RDState:
    """Advance one step: reaction then diffusion (``lie``), or the symmetric
    half-reaction / diffusion / half-reaction sequence (``strang``).

    The dissipation integrals D_alpha and D_gamma accumulate the values of
    ``k F (alpha0(u) - v)`` and ``k F (u - gamma0(v))`` at the state the
    implicit reaction solve produced.
    """
    if dt <= 0:
        raise ValueError("dt must be > 0")
    sel = _selections(spec.alpha)
    if splitting == "lie":
        new = _diffuse(_react(state, spec, grid, dt, sel), spec, grid, dt)
    elif splitting == "strang":
        half = _react(state, spec, grid, 0.5 * dt, sel)
        new = _react(_diffuse(half, spec, grid, dt), spec, grid, 0.5 * dt, sel)
    else:
        raise ValueError(f"unknown splitting {splitting!r}")
    return replace(new, t=state.t + dt)


@dataclass
class RDResult:
    trajectory: Trajectory
    diagnostics: Diagnostics
    final: RDState


def _record(diag, state, grid, p):
    h = grid.h
    mu, mv = grid.integrate(state.u), grid.integrate(state.v)
    diag.append(
        t=state.t,
        mass_u=mu,
        mass_v=mv,
        mass_sum=float(np.sum(state.u + state.v) * h),
        l2_u=lp_norm(state.u, h, 2),
        l2_v=lp_norm(state.v, h, 2),
        lp_u=lp_norm(state.u, h, p),
        lp_v=lp_norm(state.v, h, p),
        linf_u=lp_norm(state.u, h, np.inf),
        linf_v=lp_norm(state.v, h, np.inf),
        D_alpha=state.D_alpha,
        D_gamma=state.D_gamma,
    )


def run_rd(spec, u0, v0, grid: Grid1D, T, dt, stride=1, splitting="lie", p=4.0) -> RDResult:
    """Integrate the system on [0, T]; snapshots every ``stride`` steps.

    Diagnostics (masses, L2 / Lp / Linf norms, dissipation integrals) are
    recorded at every step regardless of the stride.
    """
    n_steps = step_count(T, dt)
    stride = int(stride)
    if stride < 1 or n_steps % stride:
        raise ValueError(f"stride={stride} must divide the step count {n_steps}")
    u0 = np.array(u0, dtype=float)
    v0 = np.array(v0, dtype=float)
    if u0.shape != (grid.n_cells,) or v0.shape != (grid.n_cells,):
        raise ValueError("initial fields must have one value per cell")
    if not (np.all(np.isfinite(u0)) and np.all(np.isfinite(v0))):
        raise NonFinite("initial data not finite")
    state = RDState(0.0, u0, v0)
    diag = Diagnostics()
    _record(diag, state, grid, p)
    n_snap = n_steps // stride + 1
    us = np.empty((n_snap, grid.n_cells))
    vs = np.empty((n_snap, grid.n_cells))
    us[0], vs[0] = u0, v0
    for n in range(1, n_steps + 1):
        try:
            state = step_rd(state, spec, grid, dt, splitting)
        except NonFinite as exc:
            raise Aborted(n, exc) from exc
        state = replace(state, t=n * dt)
        _record(diag, state, grid, p)
        if n % stride == 0:
            us[n // stride] = state.u
            vs[n // stride] = state.v
    times = np.arange(n_snap) * dt * stride
    traj = Trajectory(times, {"u": us, "v": vs}, dt, stride)
    return RDResult(traj, diag, state)
