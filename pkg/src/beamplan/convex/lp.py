"""Dense two-phase simplex for small linear programs.

The time-sharing programs this package solves have at most a handful of
variables (one hovering duration per candidate location), so an exact-pivot
tableau simplex with Bland's anti-cycling rule is both simple and reliable.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ..config import DEFAULT_CONFIG, SolveConfig
from ..errors import ConfigError, Infeasible, IterationLimit, Unbounded

_EPS = 1e-11


@dataclass(frozen=True)
class LinearProgram:
    """maximize c.x  subject to  A x <= b,  x >= lower (0 by default)."""

    c: np.ndarray
    rows_a: np.ndarray
    rows_b: np.ndarray
    lower: Optional[np.ndarray] = None

    def __post_init__(self):
        c = np.asarray(self.c, dtype=float)
        a = np.asarray(self.rows_a, dtype=float).reshape(-1, c.size)
        b = np.asarray(self.rows_b, dtype=float).reshape(-1)
        lo = (
            np.zeros(c.size)
            if self.lower is None
            else np.asarray(self.lower, dtype=float)
        )
        if a.shape[0] != b.size or lo.size != c.size:
            raise ConfigError("inconsistent LP shapes")
        if not (
            np.all(np.isfinite(c))
            and np.all(np.isfinite(a))
            and np.all(np.isfinite(b))
            and np.all(np.isfinite(lo))
        ):
            raise ConfigError("LP coefficients must be finite")
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "rows_a", a)
        object.__setattr__(self, "rows_b", b)
        object.__setattr__(self, "lower", lo)


@dataclass(frozen=True)
class LpSolution:
    x: np.ndarray
    objective: float
    duals: np.ndarray  # one nonnegative price per inequality row
    pivots: int = field(default=0, compare=False)


def _pivot(tab: np.ndarray, basis: np.ndarray, row: int, col: int) -> None:
    tab[row] /= tab[row, col]
    piv = tab[row]
    for i in range(tab.shape[0]):
        if i != row and tab[i, col] != 0.0:
            tab[i] -= tab[i, col] * piv
    basis[row] = col


def _simplex(tab, basis, ncols, max_pivots):
    """Bland-rule simplex on a tableau whose last row is the cost row.

    Minimizes; entering variable is the lowest-index column with a negative
    reduced cost, the leaving row breaks ratio ties by the lowest basic
    variable index.  Returns the pivot count; raises Unbounded.
    """
    pivots = 0
    cost = tab[-1]
    while True:
        col = -1
        for j in range(ncols):
            if cost[j] < -_EPS:
                col = j
                break
        if col < 0:
            return pivots
        rows = [i for i in range(tab.shape[0] - 1) if tab[i, col] > _EPS]
        if not rows:
            raise Unbounded("LP objective is unbounded above")
        ratios = [max(tab[i, -1], 0.0) / tab[i, col] for i in rows]
        rmin = min(ratios)
        tie = rmin + 1e-9 * (1.0 + abs(rmin))
        ratios_row = min(
            (i for i, r in zip(rows, ratios) if r <= tie), key=lambda i: basis[i]
        )
        _pivot(tab, basis, ratios_row, col)
        pivots += 1
        if pivots > max_pivots:
            raise IterationLimit(f"simplex exceeded {max_pivots} pivots")


def solve_lp(lp: LinearProgram, cfg: SolveConfig = DEFAULT_CONFIG) -> LpSolution:
    """Solve the LP to optimality.

    Returns the optimal point, objective, and dual prices of the inequality
    rows.  Raises Infeasible, Unbounded, or IterationLimit.
    """
    m = lp.c.size
    n = lp.rows_b.size
    max_pivots = cfg.max_iters if cfg.max_iters > 0 else 200 * (m + n + 10)

    # Shift to y = x - lower >= 0.
    b = lp.rows_b - lp.rows_a @ lp.lower
    a = lp.rows_a.copy()

    neg = b < -_EPS
    n_art = int(neg.sum())
    # Columns: y (m) | slacks (n) | artificials (n_art) | rhs.
    ncols = m + n + n_art
    tab = np.zeros((n + 1, ncols + 1))
    tab[:n, :m] = a
    tab[:n, m : m + n] = np.eye(n)
    tab[:n, -1] = b
    basis = np.array([m + i for i in range(n)])

    art_col = m + n
    for i in np.flatnonzero(neg):
        tab[i, : m + n] *= -1.0
        tab[i, -1] *= -1.0
        tab[i, art_col] = 1.0
        basis[i] = art_col
        art_col += 1

    if n_art:
        # Phase 1: minimize the sum of artificials.
        cost = tab[-1]
        cost[m + n : m + n + n_art] = 1.0
        for i in range(n):
            if basis[i] >= m + n:
                cost -= tab[i]
        pivots1 = _simplex(tab, basis, ncols, max_pivots)
        if tab[-1, -1] < -1e-8 * max(1.0, np.abs(b).max()):
            raise Infeasible("no feasible point satisfies the LP rows")
        # Drive any lingering artificial out of the basis.
        for i in range(n):
            if basis[i] >= m + n:
                for j in range(m + n):
                    if abs(tab[i, j]) > _EPS:
                        _pivot(tab, basis, i, j)
                        break
        tab[:, m + n : m + n + n_art] = 0.0
        tab[-1] = 0.0
    else:
        pivots1 = 0

    # Phase 2: minimize -c.y.
    cost = tab[-1]
    cost[:m] = -lp.c
    cost[m:] = 0.0
    cost[-1] = 0.0
    for i in range(n):
        j = basis[i]
        if j < m and abs(cost[j]) > 0:
            cost -= cost[j] * tab[i]
    pivots2 = _simplex(tab, basis, m + n, max_pivots)

    y = np.zeros(m)
    for i in range(n):
        if basis[i] < m:
            y[basis[i]] = tab[i, -1]
    x = lp.lower + y
    duals = tab[-1, m : m + n].copy()
    duals[np.abs(duals) < _EPS] = 0.0
    return LpSolution(
        x=x,
        objective=float(lp.c @ x),
        duals=duals,
        pivots=pivots1 + pivots2,
    )
