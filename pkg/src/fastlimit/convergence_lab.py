"""k-sweeps against the limit solution, error norms and translation moduli."""
from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple

import numpy as np

from . import __version__
from .errors import EmptyInterior, ShapeMismatch, TauTooLarge, XiTooLarge
from .grid import Grid1D, Trajectory
from .limit_solver import run_limit, weak_residual
from .rd_solver import run_rd

REPORT_COLUMNS = ("k", "err_l1_u", "err_l1_v", "err_l15_u", "err_l2_u", "d_alpha", "d_gamma", "linf_max")


@dataclass(frozen=True)
class SpaceTimeField:
    """Snapshots ``values[n, i]`` at times ``n * spacing`` and cell centres."""

    values: np.ndarray
    spacing: float
    h: float
    x: np.ndarray

    @classmethod
    def from_trajectory(cls, traj: Trajectory, name: str, grid: Grid1D):
        return cls(np.asarray(traj.fields[name], dtype=float), traj.spacing, grid.h, grid.centers)

    @property
    def T(self):
        return (self.values.shape[0] - 1) * self.spacing


def _time_weights(n, spacing):
    # trapezoid weights over stored snapshots; they sum to (n - 1) * spacing
    w = np.full(n, spacing)
    w[0] = w[-1] = 0.5 * spacing
    return w


def _lp(diff, tw, h, s):
    return float(np.sum(tw[:, None] * np.abs(diff) ** s) * h) ** (1.0 / s)


def _multiple(value, unit, what):
    m = value / unit
    r = round(m)
    if abs(m - r) > 1e-9 * max(1.0, abs(m)):
        raise ValueError(f"{what}={value} is not a multiple of {unit}")
    return int(r)


def error_Ls(A: SpaceTimeField, B: SpaceTimeField, s: float) -> float:
    """``(∫∫ |A - B|^s)^(1/s)`` over the stored snapshots."""
    if A.values.shape != B.values.shape or A.h != B.h or not math.isclose(A.spacing, B.spacing):
        raise ShapeMismatch("fields differ in grid or snapshot times")
    if not (1 <= s < math.inf):
        raise ValueError("s must lie in [1, inf)")
    if A.values.shape[0] < 2:
        raise ValueError("need at least two snapshots")
    tw = _time_weights(A.values.shape[0], A.spacing)
    return _lp(A.values - B.values, tw, A.h, s)


def time_translation_modulus(A: SpaceTimeField, tau: float, s: float) -> float:
    """``(∫_0^{T-tau} ∫ |A(x, t+tau) - A(x, t)|^s)^(1/s)``."""
    if tau == 0:
        return 0.0
    m = _multiple(tau, A.spacing, "tau")
    n = A.values.shape[0]
    if m < 0 or m >= n - 1:
        raise TauTooLarge(f"tau={tau} must lie in [0, T)")
    diff = A.values[m:] - A.values[: n - m]
    tw = _time_weights(n - m, A.spacing)
    return _lp(diff, tw, A.h, s)


def space_translation_modulus(A: SpaceTimeField, xi: float, s: float, r: float) -> float:
    """Translate-difference norm over ``Omega_r x (0, T)``.

    ``Omega_r`` holds the cells whose centre keeps distance at least ``2r``
    from both ends of the domain; ``|xi| <= 2r`` keeps the shifted cell
    inside the domain.
    """
    if abs(xi) > 2 * r * (1 + 1e-12):
        raise XiTooLarge(f"|xi|={abs(xi)} exceeds 2r={2 * r}")
    j = _multiple(xi, A.h, "xi")
    a = A.x[0] - 0.5 * A.h
    b = A.x[-1] + 0.5 * A.h
    tol = 1e-9 * A.h
    inside = np.nonzero((A.x - 2 * r >= a - tol) & (A.x + 2 * r <= b + tol))[0]
    if inside.size == 0:
        raise EmptyInterior(f"no cells at distance 2r={2 * r} from the boundary")
    if j == 0:
        return 0.0
    diff = A.values[:, inside + j] - A.values[:, inside]
    tw = _time_weights(A.values.shape[0], A.spacing)
    return _lp(diff, tw, A.h, s)


class TailMass(NamedTuple):
    tail: float
    holder_bound: float | None
    measure: float


def _overlap(lo, hi, a, b):
    return np.clip(np.minimum(hi, b) - np.maximum(lo, a), 0.0, None)


def tail_mass(A: SpaceTimeField, s: float, omega_fraction: float) -> TailMass:
    """L^s norm of A outside a centred space-time box of the given measure fraction.

    The box has the same relative size ``sqrt(omega_fraction)`` in x and t.
    Quadrature cells are split exactly at the box edges. The Hölder bound
    ``(||A||_2^s * meas^((2-s)/2))^(1/s)`` is returned alongside for s <= 2.
    """
    if not 0 < omega_fraction < 1:
        raise ValueError("omega_fraction must lie in (0, 1)")
    n_t, n_x = A.values.shape
    q = math.sqrt(omega_fraction)
    a = A.x[0] - 0.5 * A.h
    b = A.x[-1] + 0.5 * A.h
    L, T = b - a, A.T
    cx, ct = 0.5 * (a + b), 0.5 * T
    ox = _overlap(A.x - 0.5 * A.h, A.x + 0.5 * A.h, cx - 0.5 * q * L, cx + 0.5 * q * L)
    times = np.arange(n_t) * A.spacing
    t_lo = np.maximum(times - 0.5 * A.spacing, 0.0)
    t_hi = np.minimum(times + 0.5 * A.spacing, T)
    ot = _overlap(t_lo, t_hi, ct - 0.5 * q * T, ct + 0.5 * q * T)
    W = np.outer(t_hi - t_lo, np.full(n_x, A.h))
    w_out = W - np.outer(ot, ox)
    w_out = np.clip(w_out, 0.0, None)
    absA = np.abs(A.values)
    tail = float(np.sum(w_out * absA**s)) ** (1.0 / s)
    meas = float(np.sum(w_out))
    bound = None
    if s <= 2:
        l2 = float(np.sum(W * absA**2)) ** 0.5
        bound = (l2**s * meas ** ((2.0 - s) / 2.0)) ** (1.0 / s)
    return TailMass(tail, bound, meas)


# -- reports -------------------------------------------------------------------


@dataclass
class ConvergenceReport:
    rows: list
    slope_l1_u: float | None
    config_hash: str = ""
    tool_version: str = __version__
    limit: dict = field(default_factory=dict)
    extras: dict = field(default_factory=dict)
    failures: dict = field(default_factory=dict)
    nonunique_regime: bool = False

    def column(self, name):
        return np.array([row[name] for row in self.rows], dtype=float)


def fit_slope(ks, errs):
    """Least-squares slope of log(err) against log(k); None if undetermined."""
    pts = [(math.log(k), math.log(e)) for k, e in zip(ks, errs) if k > 0 and e > 0 and math.isfinite(e)]
    if len(pts) < 2 or len({p[0] for p in pts}) < 2:
        return None
    x = np.array([p[0] for p in pts])
    y = np.array([p[1] for p in pts])
    return float(np.polyfit(x, y, 1)[0])


def _sweep_one(cfg_dict, k, u_star, v_star):
    from .config import RunConfig

    cfg = RunConfig.from_dict(cfg_dict)
    return _row_for_k(cfg, k, u_star, v_star)


def _row_for_k(cfg, k, u_star, v_star):
    grid = cfg.build_grid()
    init = cfg.build_initial(grid)
    u0k, v0k = init.family(k)
    spec = cfg.build_spec(k)
    res = run_rd(spec, u0k, v0k, grid, cfg.time.T, cfg.time.dt, cfg.time.stride, cfg.time.splitting)
    U = SpaceTimeField.from_trajectory(res.trajectory, "u", grid)
    V = SpaceTimeField.from_trajectory(res.trajectory, "v", grid)
    Us = SpaceTimeField(u_star, U.spacing, U.h, U.x)
    Vs = SpaceTimeField(v_star, V.spacing, V.h, V.x)
    d = res.diagnostics
    row = {
        "k": float(k),
        "err_l1_u": error_Ls(U, Us, 1.0),
        "err_l1_v": error_Ls(V, Vs, 1.0),
        "err_l15_u": error_Ls(U, Us, cfg.sweep.s),
        "err_l2_u": error_Ls(U, Us, 2.0),
        "d_alpha": float(res.final.D_alpha),
        "d_gamma": float(res.final.D_gamma),
        "linf_max": float(np.max(d["linf_u"] + d["linf_v"])),
    }
    moduli = {}
    for m in cfg.sweep.tau_multiples:
        tau = m * U.spacing
        moduli[str(m)] = time_translation_modulus(U, tau, 1.0) + time_translation_modulus(V, tau, 1.0)
    extras = {
        "time_modulus_s1": moduli,
        "mass_drift": float(abs(d["mass_sum"][-1] - d["mass_sum"][0])),
    }
    return row, extras


def k_sweep(cfg, jobs: int = 1) -> ConvergenceReport:
    """Run the limit problem once and the full system for every k in the sweep.

    Errors compare each (u^k, v^k) with the split ``(u*, v*)`` of the limit
    trajectory on the same grid and snapshot times. A failing k yields a NaN
    row and an entry in ``report.failures``.
    """
    grid = cfg.build_grid()
    init = cfg.build_initial(grid)
    lspec = cfg.build_limit_spec()
    z0 = init.u0 + init.v0
    lim = run_limit(lspec, z0, grid, cfg.time.T, cfg.time.dt, cfg.time.stride)
    u_star = lim.trajectory["u_star"]
    v_star = lim.trajectory["v_star"]
    ks = sorted(float(k) for k in cfg.sweep.k)
    results = {}
    failures = {}
    if jobs > 1 and len(ks) > 1:
        cfg_dict = cfg.to_dict()
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futs = {k: pool.submit(_sweep_one, cfg_dict, k, u_star, v_star) for k in ks}
            for k in ks:
                try:
                    results[k] = futs[k].result()
                except Exception as exc:  # noqa: BLE001 - reported per k
                    failures[k] = f"{type(exc).__name__}: {exc}"
    else:
        for k in ks:
            try:
                results[k] = _row_for_k(cfg, k, u_star, v_star)
            except Exception as exc:  # noqa: BLE001
                failures[k] = f"{type(exc).__name__}: {exc}"
    rows, extras = [], {}
    for k in ks:
        if k in results:
            row, ext = results[k]
            extras[_kkey(k)] = ext
        else:
            row = {c: (k if c == "k" else math.nan) for c in REPORT_COLUMNS}
        rows.append(row)
    ok = [r for r in rows if math.isfinite(r["err_l1_u"])]
    slope = fit_slope([r["k"] for r in ok], [r["err_l1_u"] for r in ok])
    lim_meta = {
        "max_step_residual": float(np.max(lim.diagnostics["residual"])),
        "max_newton_iters": int(np.max(lim.diagnostics["newton_iters"])),
        "weak_residual": weak_residual(lim.trajectory, lspec, grid),
    }
    return ConvergenceReport(
        rows=rows,
        slope_l1_u=slope,
        config_hash=cfg.config_hash,
        limit=lim_meta,
        extras=extras,
        failures={_kkey(k): v for k, v in failures.items()},
        nonunique_regime=lspec.nonunique_regime,
    )


def _kkey(k):
    return repr(float(k))


def _num(x):
    return None if isinstance(x, float) and not math.isfinite(x) else x


def write_report(report: ConvergenceReport, path) -> tuple:
    """Write ``path`` (CSV) and a JSON sidecar next to it; returns both paths."""
    path = Path(path)
    json_path = path.with_suffix(".json")
    try:
        with path.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(REPORT_COLUMNS)
            for row in report.rows:
                w.writerow([repr(float(row[c])) for c in REPORT_COLUMNS])
        payload = {
            "config_hash": report.config_hash,
            "slope_l1_u": report.slope_l1_u,
            "tool_version": report.tool_version,
            "rows": [{c: _num(float(row[c])) for c in REPORT_COLUMNS} for row in report.rows],
            "nonunique_regime": report.nonunique_regime,
            "failures": report.failures,
        }
        json_path.write_text(json.dumps(payload, indent=2) + "\n")
    except OSError as exc:
        raise OSError(f"cannot write report to {path}: {exc}") from exc
    return path, json_path


def read_report(path) -> ConvergenceReport:
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.DictReader(fh)
        rows = [{c: float(r[c]) for c in REPORT_COLUMNS} for r in reader]
    meta = json.loads(path.with_suffix(".json").read_text())
    return ConvergenceReport(
        rows=rows,
        slope_l1_u=meta["slope_l1_u"],
        config_hash=meta["config_hash"],
        tool_version=meta["tool_version"],
        failures=meta.get("failures", {}),
        nonunique_regime=meta.get("nonunique_regime", False),
    )
