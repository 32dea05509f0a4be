import math

import numpy as np
import pytest

from fastlimit.monotone_graph import make_graph


def random_graph(rng, max_knots=5):
    """Random maximal monotone piecewise-linear graph with full range of s."""
    n = int(rng.integers(1, max_knots + 1))
    us = np.sort(rng.uniform(-5, 5, n))
    while len(np.unique(us)) < n:
        us = np.sort(rng.uniform(-5, 5, n))
    knots = []
    v = rng.uniform(-3, 3)
    for u in us:
        jump = rng.uniform(0, 2) if rng.random() < 0.5 else 0.0
        knots.append([float(u), float(v), float(v + jump)])
        v = v + jump + rng.uniform(0, 3) * (rng.random() < 0.7)
    # strictly increasing knots could still produce a decreasing curve if
    # the gap between them were negative; the draw above never does that
    left_inf = rng.random() < 0.3
    right_inf = rng.random() < 0.3
    if left_inf:
        knots[0][1] = -math.inf
        left = None
    else:
        left = float(rng.uniform(0, 3)) * (rng.random() < 0.8)
    if right_inf:
        knots[-1][2] = math.inf
        right = None
    else:
        right = float(rng.uniform(0, 3)) * (rng.random() < 0.8)
    return make_graph(knots, tails=(left, right))


def points_on_curve(g, rng, n):
    """Random points (u, v) of the graph, finite, inside [-8, 8] in u."""
    us, vs = [], []
    dmin, dmax = g.domain
    lo_u, hi_u = max(dmin, -8.0), min(dmax, 8.0)
    for _ in range(n):
        if rng.random() < 0.3:
            u = float(rng.choice(g.u))
        else:
            u = float(rng.uniform(lo_u, hi_u))
        vlo, vhi = g.section(u)
        if math.isinf(vlo) and math.isinf(vhi):
            vlo, vhi = -5.0, 5.0
        elif math.isinf(vlo):
            vlo = vhi - 5.0
        if math.isinf(vhi):
            vhi = vlo + 5.0
        us.append(u)
        vs.append(float(rng.uniform(vlo, vhi)))
    return np.array(us), np.array(vs)


def bisection_resolvent(g, lam, s, lo=-1e6, hi=1e6):
    """Root of the monotone inclusion s in u + lam*alpha(u) by bisection on u."""
    dmin, dmax = g.domain
    lo, hi = max(lo, dmin), min(hi, dmax)
    for _ in range(400):
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        vlo, vhi = g.section(mid)
        if mid + lam * vlo > s:
            hi = mid
        elif mid + lam * vhi < s:
            lo = mid
        else:
            return mid
    return 0.5 * (lo + hi)


@pytest.fixture
def rng():
    return np.random.default_rng(20261017)
