"""Thomas algorithm for tridiagonal systems.

Rows are processed with plain Python floats; for the grid sizes used here
(a few hundred cells) this beats per-element numpy indexing by a wide margin.
"""
from __future__ import annotations

import numpy as np


class ThomasFactor:
    """Forward-elimination factors of a tridiagonal matrix.

    ``lower[i]`` multiplies ``x[i-1]`` in row i (``lower[0]`` unused),
    ``upper[i]`` multiplies ``x[i+1]`` (``upper[-1]`` unused). No pivoting:
    the matrix must be diagonally dominant by rows or columns.
    """

    def __init__(self, lower, diag, upper):
        a = [float(x) for x in lower]
        b = [float(x) for x in diag]
        c = [float(x) for x in upper]
        n = len(b)
        if not (len(a) == len(c) == n):
            raise ValueError("lower, diag and upper must have equal length")
        cp = [0.0] * n
        inv = [0.0] * n
        denom = b[0]
        if denom == 0.0:
            raise ZeroDivisionError("zero pivot in row 0")
        inv[0] = 1.0 / denom
        cp[0] = c[0] * inv[0] if n > 1 else 0.0
        for i in range(1, n):
            denom = b[i] - a[i] * cp[i - 1]
            if denom == 0.0:
                raise ZeroDivisionError(f"zero pivot in row {i}")
            inv[i] = 1.0 / denom
            cp[i] = c[i] * inv[i] if i < n - 1 else 0.0
        self.n = n
        self._a = a
        self._cp = cp
        self._inv = inv

    def solve(self, rhs):
        d = rhs.tolist() if isinstance(rhs, np.ndarray) else [float(x) for x in rhs]
        n, a, cp, inv = self.n, self._a, self._cp, self._inv
        if len(d) != n:
            raise ValueError(f"rhs has length {len(d)}, expected {n}")
        d[0] = d[0] * inv[0]
        for i in range(1, n):
            d[i] = (d[i] - a[i] * d[i - 1]) * inv[i]
        for i in range(n - 2, -1, -1):
            d[i] -= cp[i] * d[i + 1]
        return np.array(d)


def solve_tridiagonal(lower, diag, upper, rhs):
    """Solve a single tridiagonal system with the Thomas algorithm."""
    return ThomasFactor(lower, diag, upper).solve(rhs)
