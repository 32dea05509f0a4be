"""Implicit solver for the limit problem ``z_t = (beta(z))_xx + f(z)``.

Each step solves the monotone system ``z' - dt*L beta(z') = z + dt*f(z)``
in the unknown z (not beta(z), which may be flat). Damped Newton does the
work; red-black nonlinear Gauss-Seidel takes over when Newton stalls on a
kink. Each Gauss-Seidel cell update is an exact scalar solve through the
resolvent of the piecewise-linear beta.
"""
from __future__ import annotations

import functools
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import Aborted, NoConvergence, NonFinite
from .grid import Diagnostics, Grid1D, Trajectory, lp_norm, step_count
from .monotone_graph import MonotoneGraph, beta_graph, limit_pair
from .reaction_model import _as_rate, _is_zero, f_limit
from .tridiag import ThomasFactor

DIAGNOSTIC_COLUMNS = ("t", "mass_z", "l2_z", "linf_z", "newton_iters", "residual")


@dataclass(frozen=True)
class LimitProblemSpec:
    """beta and f derived from a graph, the diffusivities and (f1, f2)."""

    graph: MonotoneGraph
    d1: float
    d2: float
    f1: Callable = field(default_factory=lambda: _as_rate(None))
    f2: Callable = field(default_factory=lambda: _as_rate(None))

    def __post_init__(self):
        if not self.d1 > 0:
            raise ValueError(f"d1 must be > 0, got {self.d1}")
        if not self.d2 >= 0:
            raise ValueError(f"d2 must be >= 0, got {self.d2}")
        object.__setattr__(self, "f1", _as_rate(self.f1))
        object.__setattr__(self, "f2", _as_rate(self.f2))

    @functools.cached_property
    def beta_graph(self) -> MonotoneGraph:
        return beta_graph(self.graph, self.d1, self.d2)

    @property
    def beta_lipschitz(self):
        return max(self.d1, self.d2)

    @property
    def has_source(self):
        return not (_is_zero(self.f1) and _is_zero(self.f2))

    def beta(self, s):
        s = np.asarray(s, dtype=float)
        out = self.d2 * s + (self.d1 - self.d2) * np.asarray(self.graph.resolvent(1.0, s))
        return float(out) if out.ndim == 0 else out

    def beta_slope(self, s):
        return self.beta_graph.slope_right(s)

    def f(self, s):
        if not self.has_source:
            return np.zeros_like(np.asarray(s, dtype=float))
        return f_limit(self.graph, self.f1, self.f2, s)

    @property
    def nonunique_regime(self):
        """True when uniqueness of the limit is not guaranteed: d2 = 0, beta
        has a flat piece, and a source term is present."""
        if self.d2 > 0 or not self.has_source:
            return False
        bg = self.beta_graph
        slopes = list(bg.segment_slopes) + [bg.left_slope or 0.0, bg.right_slope or 0.0]
        return any(s == 0.0 for s in slopes)


@dataclass
class StepInfo:
    iterations: int
    residual: float
    residual_history: list
    gauss_seidel_sweeps: int


def _residual(w, r, spec, grid, dt):
    return w - dt * grid.laplacian(spec.beta(w)) - r


def _gauss_seidel(w, r, spec, grid, dt, sweeps):
    mu = dt / grid.h**2
    n = grid.n_cells
    coef = np.full(n, 2.0 * mu)
    coef[0] = coef[-1] = mu
    bg = spec.beta_graph
    idx = np.arange(n)
    for _ in range(sweeps):
        for colour in (0, 1):
            b = spec.beta(w)
            nb = np.zeros(n)
            nb[1:] += b[:-1]
            nb[:-1] += b[1:]
            rhs = r + mu * nb
            sel = idx % 2 == colour
            for lam in np.unique(coef[sel]):
                m = sel & (coef == lam)
                w[m] = bg.resolvent(lam, rhs[m])
    return w


def solve_limit_step(z, spec: LimitProblemSpec, grid: Grid1D, dt, max_iter=100, tol_factor=1e-11):
    """One implicit step; returns ``(z_new, StepInfo)``.

    Converged when the sup-norm residual is at most
    ``tol_factor * (1 + ||z||_inf)``. One extra Newton step is tried after
    convergence and kept only if it lowers the residual further.
    """
    z = np.asarray(z, dtype=float)
    if dt <= 0:
        raise ValueError("dt must be > 0")
    r = z + dt * np.asarray(spec.f(z)) if spec.has_source else z.copy()
    mu = dt / grid.h**2
    n = grid.n_cells
    w = r.copy()
    G = _residual(w, r, spec, grid, dt)
    norm = float(np.max(np.abs(G)))
    history = [norm]
    tol = tol_factor * (1.0 + float(np.max(np.abs(w))))
    sweeps = 0
    polished = False
    for it in range(1, max_iter + 1):
        if not np.isfinite(norm):
            raise NonFinite("non-finite residual in limit step")
        if norm <= tol:
            if polished or norm == 0.0:
                break
            polished = True
        bp = np.asarray(spec.beta_slope(w))
        diag = 1.0 + 2.0 * mu * bp
        diag[0] = 1.0 + mu * bp[0]
        diag[-1] = 1.0 + mu * bp[-1]
        lower = np.zeros(n)
        upper = np.zeros(n)
        lower[1:] = -mu * bp[:-1]
        upper[:-1] = -mu * bp[1:]
        delta = ThomasFactor(lower, diag, upper).solve(-G)
        t = 1.0
        accepted = False
        while t >= 1.0 / 64:
            cand = w + t * delta
            Gc = _residual(cand, r, spec, grid, dt)
            nc = float(np.max(np.abs(Gc)))
            if nc < norm:
                w, G, norm = cand, Gc, nc
                accepted = True
                break
            t *= 0.5
        if not accepted:
            if polished:
                break  # already converged; polishing made no progress
            w = _gauss_seidel(w, r, spec, grid, dt, 4)
            sweeps += 4
            G = _residual(w, r, spec, grid, dt)
            norm = float(np.max(np.abs(G)))
        history.append(norm)
        tol = tol_factor * (1.0 + float(np.max(np.abs(w))))
    else:
        if norm > tol:
            raise NoConvergence(max_iter, norm)
    return w, StepInfo(len(history) - 1, norm, history, sweeps)


def step_limit(z, spec: LimitProblemSpec, grid: Grid1D, dt):
    return solve_limit_step(z, spec, grid, dt)[0]


@dataclass
class LimitResult:
    trajectory: Trajectory
    diagnostics: Diagnostics
    z0: np.ndarray


def run_limit(spec: LimitProblemSpec, z0, grid: Grid1D, T, dt, stride=1, p=4.0) -> LimitResult:
    """Integrate the limit problem; trajectory fields ``z``, ``u_star``, ``v_star``."""
    n_steps = step_count(T, dt)
    stride = int(stride)
    if stride < 1 or n_steps % stride:
        raise ValueError(f"stride={stride} must divide the step count {n_steps}")
    z = np.array(z0, dtype=float)
    if z.shape != (grid.n_cells,):
        raise ValueError("z0 must have one value per cell")
    if not np.all(np.isfinite(z)):
        raise NonFinite("initial data not finite")
    n_snap = n_steps // stride + 1
    zs = np.empty((n_snap, grid.n_cells))
    zs[0] = z
    diag = Diagnostics()
    h = grid.h

    def record(t, z, iters, res):
        diag.append(
            t=t,
            mass_z=grid.integrate(z),
            l2_z=lp_norm(z, h, 2),
            lp_z=lp_norm(z, h, p),
            linf_z=lp_norm(z, h, np.inf),
            newton_iters=iters,
            residual=res,
        )

    record(0.0, z, 0, 0.0)
    for n in range(1, n_steps + 1):
        try:
            z, info = solve_limit_step(z, spec, grid, dt)
        except NonFinite as exc:
            raise Aborted(n, exc) from exc
        record(n * dt, z, info.iterations, info.residual)
        if n % stride == 0:
            zs[n // stride] = z
    u_star, v_star = limit_pair(spec.graph, zs)
    times = np.arange(n_snap) * dt * stride
    traj = Trajectory(times, {"z": zs, "u_star": u_star, "v_star": v_star}, dt, stride)
    return LimitResult(traj, diag, np.array(z0, dtype=float))


def interface_positions(traj: Trajectory, grid: Grid1D, name="z"):
    """Zero crossings of a field, linearly interpolated between cell centres.

    Returns a list of ``(t, x)`` pairs, several per time when the field
    changes sign more than once.
    """
    xs = grid.centers
    out = []
    for t, row in zip(traj.times, traj.fields[name]):
        for i in range(len(row) - 1):
            a, b = row[i], row[i + 1]
            if (a > 0 and b <= 0) or (a < 0 and b >= 0) or (a == 0 and b != 0 and i == 0):
                if a == b:
                    continue
                x = xs[i] + (xs[i + 1] - xs[i]) * a / (a - b)
                out.append((float(t), float(x)))
    return out


def _default_test_set(grid: Grid1D, T):
    L = grid.length
    fns = []
    for m in range(4):
        for q in (1, 2):
            fns.append((m, q))
    return fns


def _test_function(m, q, grid: Grid1D, T):
    L, a = grid.length, grid.x_min
    k = m * np.pi / L

    def phi(x, t):
        return np.cos(k * (x - a)) * (1.0 - t / T) ** q

    def phi_t(x, t):
        return np.cos(k * (x - a)) * (-q / T) * (1.0 - t / T) ** (q - 1)

    def phi_x(x, t):
        return -k * np.sin(k * (x - a)) * (1.0 - t / T) ** q

    return phi, phi_t, phi_x


def weak_residual(traj: Trajectory, spec: LimitProblemSpec, grid: Grid1D, test_set=None, z0=None):
    """Largest weak-form defect of a z trajectory over a family of test functions.

    For each test function phi with phi(T) = 0 this evaluates

        | -∫∫ phi_t z + ∫∫ beta(z)_x phi_x - ∫ z0 phi(0) - ∫∫ f(z) phi |

    with cell midpoints in space and interval midpoints in time (fields at a
    midpoint are the average of the bracketing snapshots). ``test_set`` holds
    ``(m, q)`` pairs for ``cos(m pi (x - a)/L) (1 - t/T)^q`` or callables
    ``(phi, phi_t, phi_x)`` triples.
    """
    zs = traj.fields["z"]
    times = traj.times
    T = float(times[-1])
    xs = grid.centers
    h = grid.h
    z0 = zs[0] if z0 is None else np.asarray(z0, dtype=float)
    zmid = 0.5 * (zs[1:] + zs[:-1])
    tmid = 0.5 * (times[1:] + times[:-1])
    dts = np.diff(times)
    bz = np.asarray(spec.beta(zmid))
    grad_b = np.array([grid.gradient(row) for row in bz])
    fz = np.asarray(spec.f(zmid)) if spec.has_source else np.zeros_like(zmid)
    if test_set is None:
        test_set = _default_test_set(grid, T)
    X, Tm = np.meshgrid(xs, tmid)
    worst = 0.0
    for item in test_set:
        if isinstance(item, tuple) and len(item) == 2 and not callable(item[0]):
            phi, phi_t, phi_x = _test_function(item[0], item[1], grid, T)
        else:
            phi, phi_t, phi_x = item
        w = dts[:, None] * h
        total = (
            -np.sum(phi_t(X, Tm) * zmid * w)
            + np.sum(grad_b * phi_x(X, Tm) * w)
            - np.sum(z0 * phi(xs, 0.0)) * h
            - np.sum(fz * phi(X, Tm) * w)
        )
        worst = max(worst, abs(float(total)))
    return worst
