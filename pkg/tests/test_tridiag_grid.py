import csv

import numpy as np
import pytest

from fastlimit.grid import (
    Diagnostics,
    Grid1D,
    Trajectory,
    lp_norm,
    step_count,
    write_diagnostics_csv,
    write_trajectory_csv,
)
from fastlimit.tridiag import ThomasFactor, solve_tridiagonal


def test_thomas_matches_dense_solve(rng):
    for n in (1, 2, 3, 17, 100):
        lower = rng.uniform(-1, 0, n)
        upper = rng.uniform(-1, 0, n)
        diag = 2.5 + rng.uniform(0, 1, n)
        rhs = rng.normal(size=n)
        A = np.diag(diag)
        if n > 1:
            A += np.diag(lower[1:], -1) + np.diag(upper[:-1], 1)
        np.testing.assert_allclose(solve_tridiagonal(lower, diag, upper, rhs), np.linalg.solve(A, rhs), rtol=1e-12)


def test_thomas_reuse_and_errors():
    fac = ThomasFactor([0, -1, -1], [2, 2, 2], [-1, -1, 0])
    np.testing.assert_allclose(fac.solve([1, 0, 1]), [1, 1, 1])
    np.testing.assert_allclose(fac.solve(np.array([2.0, 0, 2.0])), [2, 2, 2])
    with pytest.raises(ValueError):
        fac.solve([1, 2])
    with pytest.raises(ZeroDivisionError):
        ThomasFactor([0, 0], [0, 1], [0, 0])
    with pytest.raises(ValueError):
        ThomasFactor([0], [1, 1], [0, 0])


def test_grid_basics():
    g = Grid1D(4, 0.0, 2.0)
    assert g.h == 0.5
    np.testing.assert_allclose(g.centers, [0.25, 0.75, 1.25, 1.75])
    assert g.integrate(np.ones(4)) == 2.0
    np.testing.assert_array_equal(g.laplacian(np.full(4, 3.0)), 0.0)
    assert np.sum(g.laplacian(np.array([1.0, 5.0, -2.0, 4.0]))) == pytest.approx(0.0, abs=1e-12)
    with pytest.raises(ValueError):
        Grid1D(1)
    with pytest.raises(ValueError):
        Grid1D(4, 1.0, 1.0)


def test_lp_norm():
    assert lp_norm([3.0, -4.0], 1.0, 2) == 5.0
    assert lp_norm([3.0, -4.0], 1.0, np.inf) == 4.0
    assert lp_norm([1.0, 1.0], 0.5, 1) == 1.0


def test_step_count():
    assert step_count(0.2, 2e-4) == 1000
    with pytest.raises(ValueError):
        step_count(1.0, 0.3)
    with pytest.raises(ValueError):
        step_count(0.0, 0.1)


def test_csv_writers_roundtrip(tmp_path):
    g = Grid1D(3)
    traj = Trajectory(np.array([0.0, 0.1]), {"u": np.arange(6.0).reshape(2, 3) / 7}, 0.05, 2)
    assert traj.spacing == pytest.approx(0.1) and traj.T == 0.1
    p = tmp_path / "snap.csv"
    write_trajectory_csv(traj, g, p, ["u"])
    rows = list(csv.reader(p.open()))
    assert rows[0] == ["t", "x", "u"]
    assert len(rows) == 7
    assert float(rows[5][2]) == traj["u"][1, 1]
    d = Diagnostics()
    d.append(t=0.0, m=1 / 3)
    d.append(t=0.1, m=2 / 3)
    q = tmp_path / "diag.csv"
    write_diagnostics_csv(d, q, ["t", "m"])
    rows = list(csv.reader(q.open()))
    assert rows[0] == ["t", "m"] and float(rows[2][1]) == 2 / 3
