"""Cell-centred 1D grid with zero-flux closure, trajectories and CSV output."""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


@dataclass(frozen=True)
class Grid1D:
    n_cells: int
    x_min: float = 0.0
    x_max: float = 1.0

    def __post_init__(self):
        if int(self.n_cells) != self.n_cells or self.n_cells < 2:
            raise ValueError(f"n_cells must be an integer >= 2, got {self.n_cells}")
        if not self.x_max > self.x_min:
            raise ValueError("x_max must exceed x_min")

    @property
    def h(self) -> float:
        return (self.x_max - self.x_min) / self.n_cells

    @property
    def length(self) -> float:
        return self.x_max - self.x_min

    @property
    def centers(self) -> np.ndarray:
        return self.x_min + (np.arange(self.n_cells) + 0.5) * self.h

    def integrate(self, values):
        return float(np.sum(values) * self.h)

    def laplacian(self, w):
        """3-point Laplacian with mirrored ghost cells (zero flux)."""
        w = np.asarray(w, dtype=float)
        out = np.empty_like(w)
        out[1:-1] = w[:-2] - 2.0 * w[1:-1] + w[2:]
        out[0] = w[1] - w[0]
        out[-1] = w[-2] - w[-1]
        return out / self.h**2

    def gradient(self, w):
        """Centred differences with mirrored ghost cells."""
        w = np.asarray(w, dtype=float)
        ghost = np.concatenate(([w[0]], w, [w[-1]]))
        return (ghost[2:] - ghost[:-2]) / (2.0 * self.h)


def lp_norm(values, h, p):
    values = np.abs(np.asarray(values, dtype=float))
    if np.isinf(p):
        return float(np.max(values))
    return float((np.sum(values**p) * h) ** (1.0 / p))


@dataclass
class Trajectory:
    """Snapshots of one or more fields at uniformly spaced times.

    ``fields[name]`` has shape ``(len(times), n_cells)``; ``times[0] = 0``
    and consecutive snapshots are ``dt * stride`` apart.
    """

    times: np.ndarray
    fields: dict
    dt: float
    stride: int = 1

    def __getitem__(self, name):
        return self.fields[name]

    @property
    def spacing(self) -> float:
        return self.dt * self.stride

    @property
    def T(self) -> float:
        return float(self.times[-1])


@dataclass
class Diagnostics:
    """Per-step scalar series; every column has one entry per time level."""

    columns: dict = field(default_factory=dict)

    def append(self, **values):
        for key, val in values.items():
            self.columns.setdefault(key, []).append(float(val))

    def __getitem__(self, name):
        return np.asarray(self.columns[name])

    def keys(self):
        return list(self.columns)


def _fmt(x):
    return repr(float(x))


def write_trajectory_csv(traj: Trajectory, grid: Grid1D, path, names):
    path = Path(path)
    xs = grid.centers
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "x", *names])
        for n, t in enumerate(traj.times):
            cols = [traj.fields[name][n] for name in names]
            for i, x in enumerate(xs):
                w.writerow([_fmt(t), _fmt(x), *(_fmt(c[i]) for c in cols)])


def write_diagnostics_csv(diag: Diagnostics, path, names):
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(list(names))
        series = [diag.columns[n] for n in names]
        for row in zip(*series):
            w.writerow([_fmt(x) for x in row])


def step_count(T, dt):
    """Number of steps of size dt covering [0, T]; dt must divide T."""
    if not (T > 0 and dt > 0):
        raise ValueError("T and dt must be positive")
    n = int(round(T / dt))
    if n < 1 or abs(n * dt - T) > 1e-9 * T:
        raise ValueError(f"dt={dt} does not divide T={T}")
    return n
