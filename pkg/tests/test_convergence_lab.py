import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fastlimit.config import RunConfig
from fastlimit.convergence_lab import (
    REPORT_COLUMNS,
    ConvergenceReport,
    SpaceTimeField,
    error_Ls,
    fit_slope,
    k_sweep,
    read_report,
    space_translation_modulus,
    tail_mass,
    time_translation_modulus,
    write_report,
)
from fastlimit.errors import EmptyInterior, ShapeMismatch, TauTooLarge, XiTooLarge


def _field(values, spacing=0.1, n_x=None):
    values = np.asarray(values, dtype=float)
    n_x = values.shape[1]
    h = 1.0 / n_x
    return SpaceTimeField(values, spacing, h, (np.arange(n_x) + 0.5) * h)


def _naive_Ls(A, B, s):
    n_t, n_x = A.values.shape
    total = 0.0
    for n in range(n_t):
        wt = A.spacing * (0.5 if n in (0, n_t - 1) else 1.0)
        for i in range(n_x):
            total += wt * A.h * abs(A.values[n, i] - B.values[n, i]) ** s
    return total ** (1.0 / s)


def test_error_Ls_examples(rng):
    A = _field(rng.normal(size=(11, 20)))
    assert error_Ls(A, A, 1.5) == 0.0
    B = _field(A.values - 0.3)
    T = 1.0
    for s in (1.0, 1.5, 2.0):
        assert error_Ls(A, B, s) == pytest.approx(0.3 * (1.0 * T) ** (1 / s), rel=1e-13)
    with pytest.raises(ShapeMismatch):
        error_Ls(A, _field(np.zeros((11, 10))), 1.0)
    with pytest.raises(ValueError):
        error_Ls(A, B, 0.5)


def test_error_Ls_matches_naive_loop(rng):
    for _ in range(5):
        A = _field(rng.normal(size=(9, 13)), spacing=0.05)
        B = _field(rng.normal(size=(9, 13)), spacing=0.05)
        for s in (1.0, 1.5, 2.0, 3.0):
            assert error_Ls(A, B, s) == pytest.approx(_naive_Ls(A, B, s), rel=1e-14, abs=1e-14)


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), s=st.floats(1.0, 3.0), c=st.floats(-5, 5))
def test_error_Ls_is_a_norm(seed, s, c):
    rng = np.random.default_rng(seed)
    A, B, C = (_field(rng.normal(size=(6, 8))) for _ in range(3))
    Z = _field(np.zeros((6, 8)))
    assert error_Ls(A, C, s) <= error_Ls(A, B, s) + error_Ls(B, C, s) + 1e-12
    cA = _field(c * A.values)
    assert error_Ls(cA, Z, s) == pytest.approx(abs(c) * error_Ls(A, Z, s), rel=1e-12, abs=1e-14)


def test_time_modulus_examples():
    n_t, n_x, dt = 21, 16, 0.05
    const = _field(np.tile(np.linspace(0, 1, n_x), (n_t, 1)), dt)
    assert time_translation_modulus(const, 0.2, 1.5) == 0.0
    lin = _field(np.outer(np.arange(n_t) * dt, np.ones(n_x)), dt)
    assert time_translation_modulus(lin, 0.0, 1.0) == 0.0
    T = (n_t - 1) * dt
    for tau in (0.1, 0.2, 0.4):
        for s in (1.0, 1.5):
            assert time_translation_modulus(lin, tau, s) == pytest.approx(tau * ((T - tau) * 1.0) ** (1 / s), rel=1e-12)
    with pytest.raises(TauTooLarge):
        time_translation_modulus(lin, T, 1.0)
    with pytest.raises(ValueError):
        time_translation_modulus(lin, 0.07, 1.0)


def test_space_modulus_examples():
    n_x = 40
    h = 1 / n_x
    flat = _field(np.ones((5, n_x)))
    assert space_translation_modulus(flat, 2 * h, 1.0, 0.1) == 0.0
    xs = (np.arange(n_x) + 0.5) * h
    A = _field(np.tile(xs, (5, 1)))
    assert space_translation_modulus(A, 0.0, 1.0, 0.1) == 0.0
    r = 0.1
    inside = np.sum((xs - 2 * r >= -1e-12) & (xs + 2 * r <= 1 + 1e-12))
    T = 0.4
    for xi in (h, 4 * h, -3 * h):
        for s in (1.0, 1.5):
            expected = abs(xi) * (inside * h * T) ** (1 / s)
            assert space_translation_modulus(A, xi, s, r) == pytest.approx(expected, rel=1e-10)
    with pytest.raises(XiTooLarge):
        space_translation_modulus(A, 0.3, 1.0, 0.1)
    with pytest.raises(EmptyInterior):
        space_translation_modulus(A, 0.0, 1.0, 0.3)


def test_tail_mass_examples(rng):
    ones = _field(np.ones((11, 20)))
    QT = 1.0 * 1.0
    res = tail_mass(ones, 1.5, 0.5)
    assert res.tail == pytest.approx((QT / 2) ** (1 / 1.5), rel=1e-12)
    assert res.measure == pytest.approx(0.5, rel=1e-12)
    near_one = tail_mass(ones, 1.0, 1 - 1e-12)
    assert near_one.tail < 1e-5
    for _ in range(20):
        A = _field(rng.normal(size=(11, 20)) * rng.uniform(0.1, 10))
        for s in (1.0, 1.5, 1.9):
            tm = tail_mass(A, s, rng.uniform(0.05, 0.95))
            assert tm.tail <= tm.holder_bound * (1 + 1e-12)
    with pytest.raises(ValueError):
        tail_mass(ones, 1.5, 1.0)


def test_fit_slope():
    ks = [10, 100, 1000]
    assert fit_slope(ks, [1.0, 0.1, 0.01]) == pytest.approx(-1.0)
    assert fit_slope([10], [1.0]) is None
    assert fit_slope([10, 100], [1.0, math.nan]) is None


def _row(k, base=1.0):
    return {c: (float(k) if c == "k" else base / (k + 3) + 1 / 7) for c in REPORT_COLUMNS}


def test_report_roundtrip(tmp_path):
    rep = ConvergenceReport([_row(10), _row(100)], -0.123456789, "abc")
    csv_path, json_path = write_report(rep, tmp_path / "report.csv")
    back = read_report(csv_path)
    assert back.rows == rep.rows
    assert back.slope_l1_u == rep.slope_l1_u
    assert back.config_hash == "abc"
    meta = json.loads(json_path.read_text())
    assert list(meta)[:4] == ["config_hash", "slope_l1_u", "tool_version", "rows"]
    assert csv_path.read_text().splitlines()[0] == ",".join(REPORT_COLUMNS)


def test_report_empty_and_single(tmp_path):
    p, _ = write_report(ConvergenceReport([], None), tmp_path / "empty.csv")
    assert p.read_text() == ",".join(REPORT_COLUMNS) + "\n"
    p, j = write_report(ConvergenceReport([_row(10)], None), tmp_path / "one.csv")
    assert len(p.read_text().splitlines()) == 2
    assert json.loads(j.read_text())["slope_l1_u"] is None


def test_report_io_error(tmp_path):
    with pytest.raises(OSError) as info:
        write_report(ConvergenceReport([], None), tmp_path / "missing" / "r.csv")
    assert "missing" in str(info.value)


def _linear_cfg(**sweep):
    return RunConfig.from_dict(
        {
            "problem": {"graph": "identity", "reaction": "linear:1", "d1": 1.0, "d2": 0.5},
            "grid": {"n_cells": 64},
            "time": {"T": 0.1, "dt": 5e-4, "stride": 10},
            "initial": {"a": "cos(pi*x)", "b": "cos(pi*x)"},
            "sweep": sweep,
        }
    )


def test_linear_sweep_converges():
    rep = k_sweep(_linear_cfg())
    err = rep.column("err_l1_u")
    assert np.all(np.diff(err) < 0)
    assert err[-1] <= 0.2 * err[0]
    assert rep.slope_l1_u is not None and rep.slope_l1_u < 0
    assert np.all(rep.column("d_alpha") >= -1e-10)
    assert not rep.nonunique_regime and not rep.failures
    assert [r["k"] for r in rep.rows] == sorted(r["k"] for r in rep.rows)


def test_single_k_sweep_has_null_slope():
    rep = k_sweep(_linear_cfg(k=[100.0]))
    assert len(rep.rows) == 1 and rep.slope_l1_u is None


def test_parallel_sweep_matches_serial():
    cfg = _linear_cfg(k=[10.0, 1000.0])
    a, b = k_sweep(cfg), k_sweep(cfg, jobs=2)
    assert a.rows == b.rows
