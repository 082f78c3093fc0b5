"""Ellipsoid method for convex minimization from subgradients only.

Maintains an ellipsoid guaranteed to contain every minimizer, cutting it in
half through the center at each step: an objective cut where the center is
feasible, a feasibility cut where it violates a coordinate floor.  The
certified optimality gap comes from the standard bound

    f(x*) >= f(x_t) - sqrt(g^T P g)

valid whenever the minimizer lies inside the current ellipsoid.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from ..config import DEFAULT_CONFIG, SolveConfig

__all__ = ["EllipsoidResult", "EllipsoidState", "ellipsoid_optimize"]


@dataclass(frozen=True)
class EllipsoidState:
    """Snapshot of the search ellipsoid {z : (z-c)^T P^{-1} (z-c) <= 1}."""

    center: np.ndarray
    shape: np.ndarray
    iteration: int


@dataclass
class EllipsoidResult:
    x: np.ndarray
    value: float
    converged: bool
    iterations: int
    certified_gap: float
    subgrad_norms: np.ndarray = field(repr=False)
    best_values: np.ndarray = field(repr=False)
    state: EllipsoidState = field(repr=False, default=None)


def ellipsoid_optimize(
    oracle: Callable,
    x0: np.ndarray,
    r0: float,
    lower_bounds: Optional[np.ndarray] = None,
    cfg: SolveConfig = DEFAULT_CONFIG,
    *,
    tol: Optional[float] = None,
    max_iters: Optional[int] = None,
) -> EllipsoidResult:
    """Minimize a convex function over {x >= lower_bounds}.

    ``oracle(x)`` returns ``(value, subgradient)`` and is only queried at
    points satisfying the bounds.  The initial ball (center ``x0``, radius
    ``r0``) must contain a minimizer.  Terminates when the certified gap
    drops below ``tol * max(1, |best|)`` or the iteration cap is reached, in
    which case the best iterate is still returned with ``converged=False``.
    """
    x = np.asarray(x0, dtype=float).copy()
    m = x.size
    tol = cfg.tol_obj if tol is None else tol
    if max_iters is None:
        max_iters = cfg.max_iters if cfg.max_iters > 0 else 500 * m * m
    lo = None if lower_bounds is None else np.asarray(lower_bounds, dtype=float)

    P = np.eye(m) * (r0 * r0)
    best_x = None
    best_f = np.inf
    best_lb = -np.inf
    norms = []
    bests = []
    it = 0
    converged = False

    while it < max_iters:
        it += 1
        if lo is not None and np.any(x < lo - 1e-15):
            # Feasibility cut through the most violated coordinate.
            j = int(np.argmax(lo - x))
            g = np.zeros(m)
            g[j] = -1.0
            f = None
        else:
            f, g = oracle(x)
            g = np.asarray(g, dtype=float)
            norms.append(float(np.linalg.norm(g)))
            if f < best_f:
                best_f = float(f)
                best_x = x.copy()

        Pg = P @ g
        gPg = float(g @ Pg)
        if not np.isfinite(gPg) or gPg <= 0:
            break  # ellipsoid numerically collapsed
        half_width = np.sqrt(gPg)
        if f is not None:
            best_lb = max(best_lb, f - half_width)
            gap = best_f - best_lb
            bests.append(best_f)
            if gap <= tol * max(1.0, abs(best_f)):
                converged = True
                break

        if m == 1:
            # One dimension: the ellipsoid is an interval, a cut halves it.
            r = half_width / abs(g[0])
            x[0] -= 0.5 * r * np.sign(g[0])
            P[0, 0] = (0.5 * r) ** 2
            continue

        gn = Pg / half_width
        x = x - gn / (m + 1.0)
        P = (m * m / (m * m - 1.0)) * (P - (2.0 / (m + 1.0)) * np.outer(gn, gn))
        P = 0.5 * (P + P.T)

    if best_x is None:
        best_x = x.copy()
        f, _ = oracle(np.maximum(x, lo) if lo is not None else x)
        best_f = float(f)

    gap = best_f - best_lb if np.isfinite(best_lb) else np.inf
    return EllipsoidResult(
        x=best_x,
        value=best_f,
        converged=converged,
        iterations=it,
        certified_gap=float(gap),
        subgrad_norms=np.asarray(norms),
        best_values=np.asarray(bests),
        state=EllipsoidState(center=x.copy(), shape=P.copy(), iteration=it),
    )
