"""Log-barrier path following for smooth concave maximization.

Solves

    maximize f(x)  subject to  g_i(x) >= 0,  lo <= x <= up

with f concave and every g_i concave, by minimizing the barrier
``-t f(x) - sum_i log g_i(x) - log-box terms`` along an increasing sequence
of ``t`` with a damped Newton inner loop.  The certified gap after the last
stage is (number of rows)/t.

Constraints are supplied in vectorized row groups.  A group marked
``coupling`` contributes dense rank-one terms to the Newton system; when the
program declares a uniform block partition of its variables, all remaining
(local) rows must live inside a single block each, and the Newton system is
then solved block-wise with a Woodbury correction for the coupling rows
instead of a dense factorization.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from ..config import DEFAULT_CONFIG, SolveConfig
from ..errors import IterationLimit, NoStrictlyFeasibleStart

__all__ = [
    "BarrierResult",
    "BudgetRows",
    "CallbackRows",
    "LinearRows",
    "SmoothProgram",
    "feasible_start",
    "maximize_smooth",
]

_MAX_INNER = 80
_ARMIJO = 0.25
_BACKTRACK = 0.5


# ---------------------------------------------------------------------------
# Row groups.


class LinearRows:
    """Rows g = A x - b >= 0 with constant Jacobian."""

    def __init__(self, a, b, *, coupling=False, scale=1.0, row_block=None):
        self.a = np.asarray(a, dtype=float)
        self.b = np.asarray(b, dtype=float)
        self.nrows = self.a.shape[0]
        self.coupling = coupling
        self.scale = scale
        self.row_block = None if row_block is None else np.asarray(row_block, int)

    def eval(self, x):
        return self.a @ x - self.b, self.a

    def hess_weight(self, x, w):
        return None


class BudgetRows:
    """Rows g_k = cap_k - coeff * sum_{j in cols_k} x_j^2 >= 0.

    ``cols`` is a (K, n) integer matrix; row k owns the variables it sums
    over.  These rows couple many variables, so they default to coupling
    treatment in block mode.
    """

    def __init__(self, cols, coeff, caps, *, dim, coupling=True, scale=None):
        self.cols = np.asarray(cols, dtype=int)
        self.coeff = float(coeff)
        self.caps = np.asarray(caps, dtype=float)
        self.dim = dim
        self.nrows = self.cols.shape[0]
        self.coupling = coupling
        self.scale = scale if scale is not None else np.maximum(self.caps, 1e-12)
        self.row_block = None

    def eval(self, x):
        xs = x[self.cols]
        vals = self.caps - self.coeff * np.einsum("kn,kn->k", xs, xs)
        jac = np.zeros((self.nrows, self.dim))
        rows = np.repeat(np.arange(self.nrows), self.cols.shape[1])
        jac[rows, self.cols.ravel()] = -2.0 * self.coeff * xs.ravel()
        return vals, jac

    def hess_weight(self, x, w):
        d = np.zeros(self.dim)
        np.add.at(
            d, self.cols.ravel(),
            np.repeat(2.0 * self.coeff * w, self.cols.shape[1]),
        )
        return ("diag", d)


class CallbackRows:
    """Adapter turning scalar callbacks into a row group.

    Each callback maps x to ``(value, gradient)`` or
    ``(value, gradient, hessian)`` of one concave constraint.
    """

    def __init__(self, funcs: Sequence[Callable], dim: int, *, scale=1.0):
        self.funcs = list(funcs)
        self.dim = dim
        self.nrows = len(self.funcs)
        self.coupling = False
        self.scale = scale
        self.row_block = None

    def eval(self, x):
        vals = np.empty(self.nrows)
        jac = np.zeros((self.nrows, self.dim))
        for i, fn in enumerate(self.funcs):
            out = fn(x)
            vals[i] = out[0]
            jac[i] = out[1]
        return vals, jac

    def hess_weight(self, x, w):
        h = np.zeros((self.dim, self.dim))
        used = False
        for wi, fn in zip(w, self.funcs):
            out = fn(x)
            if len(out) > 2 and out[2] is not None:
                h -= wi * np.asarray(out[2], dtype=float)
                used = True
        return ("dense", h) if used else None


@dataclass
class SmoothProgram:
    """A concave maximization problem for :func:`maximize_smooth`.

    ``objective(x)`` returns ``(value, gradient, hess)`` where ``hess`` is
    None, ``("diag", vec)``, ``("dense", mat)``, or ``("blocks", stack)``
    aligned with ``blocks``.  A value of ``-inf`` marks x outside the
    objective's domain.  ``blocks`` (optional, uniform (nb, bs) index matrix)
    switches the Newton solve to the structured path; variables outside all
    blocks then need diagonal curvature only.
    """

    dim: int
    objective: Callable
    groups: list
    lower: Optional[np.ndarray] = None
    upper: Optional[np.ndarray] = None
    blocks: Optional[np.ndarray] = None

    def n_rows(self) -> int:
        r = sum(g.nrows for g in self.groups)
        if self.lower is not None:
            r += int(np.sum(np.isfinite(self.lower)))
        if self.upper is not None:
            r += int(np.sum(np.isfinite(self.upper)))
        return r


@dataclass
class BarrierResult:
    x: np.ndarray
    value: float
    converged: bool
    newton_steps: int
    stages: int
    certified_gap: float
    multipliers: list = field(default_factory=list, repr=False)


def _strictly_feasible(prog: SmoothProgram, x: np.ndarray, margin=0.0) -> bool:
    if prog.lower is not None:
        fin = np.isfinite(prog.lower)
        if np.any(x[fin] <= prog.lower[fin]):
            return False
    if prog.upper is not None:
        fin = np.isfinite(prog.upper)
        if np.any(x[fin] >= prog.upper[fin]):
            return False
    for g in prog.groups:
        vals, _ = g.eval(x)
        if np.any(vals <= margin):
            return False
    return np.isfinite(prog.objective(x)[0])


def _phi(prog, x, t):
    """Barrier value; +inf outside the domain."""
    f = prog.objective(x)[0]
    if not np.isfinite(f):
        return np.inf
    total = -t * f
    for g in prog.groups:
        vals, _ = g.eval(x)
        if np.any(vals <= 0.0):
            return np.inf
        total -= np.log(vals).sum()
    if prog.lower is not None:
        fin = np.isfinite(prog.lower)
        s = x[fin] - prog.lower[fin]
        if np.any(s <= 0.0):
            return np.inf
        total -= np.log(s).sum()
    if prog.upper is not None:
        fin = np.isfinite(prog.upper)
        s = prog.upper[fin] - x[fin]
        if np.any(s <= 0.0):
            return np.inf
        total -= np.log(s).sum()
    return total


class _DenseKKT:
    def __init__(self, dim):
        self.dim = dim

    def reset(self):
        self.h = np.zeros((self.dim, self.dim))

    def add_diag(self, d):
        self.h[np.diag_indices(self.dim)] += d

    def add_dense(self, m):
        self.h += m

    def add_blocks(self, stack, blocks):
        for i in range(blocks.shape[0]):
            self.h[np.ix_(blocks[i], blocks[i])] += stack[i]

    def add_jtwj(self, jac, w, row_block=None, blocks=None):
        self.h += (jac * w[:, None]).T @ jac

    def add_coupling(self, v):
        self.h += v.T @ v

    def solve(self, rhs):
        h = self.h
        jitter = 0.0
        scale = max(float(np.trace(h)) / self.dim, 1e-300)
        for _ in range(8):
            try:
                c = np.linalg.cholesky(
                    h if jitter == 0.0 else h + jitter * np.eye(self.dim)
                )
                y = np.linalg.solve(c, rhs)
                return np.linalg.solve(c.T, y)
            except np.linalg.LinAlgError:
                jitter = max(jitter * 100.0, 1e-14 * scale)
        raise IterationLimit("Newton system is numerically singular")


class _BlockKKT:
    """Block-diagonal Newton system plus a Woodbury coupling correction."""

    def __init__(self, dim, blocks):
        self.dim = dim
        self.blocks = blocks
        nb, bs = blocks.shape
        covered = np.zeros(dim, dtype=bool)
        covered[blocks.ravel()] = True
        self.loose = np.flatnonzero(~covered)

    def reset(self):
        nb, bs = self.blocks.shape
        self.hdiag = np.zeros(self.dim)
        self.hblocks = np.zeros((nb, bs, bs))
        self.vs = []

    def add_diag(self, d):
        self.hdiag += d

    def add_dense(self, m):
        raise ValueError("dense Hessian contribution in block mode")

    def add_blocks(self, stack, blocks):
        self.hblocks += stack

    def add_jtwj(self, jac, w, row_block=None, blocks=None):
        if row_block is None:
            raise ValueError("local rows need a row_block map in block mode")
        rows = np.arange(jac.shape[0])
        jc = jac[rows[:, None], self.blocks[row_block]]
        contrib = np.einsum("r,ri,rj->rij", w, jc, jc)
        np.add.at(self.hblocks, row_block, contrib)

    def add_coupling(self, v):
        self.vs.append(v)

    def _solve_m(self, u):
        out = np.empty_like(u)
        if self.loose.size:
            out[self.loose] = u[self.loose] / self.hdiag[self.loose, None]
        ub = u[self.blocks]                       # (nb, bs, k)
        out[self.blocks.reshape(-1)] = np.linalg.solve(self.m, ub).reshape(
            -1, u.shape[1]
        )
        return out

    def solve(self, rhs):
        bs = self.blocks.shape[1]
        self.m = self.hblocks.copy()
        idx = np.arange(bs)
        self.m[:, idx, idx] += self.hdiag[self.blocks]
        if self.loose.size and np.any(self.hdiag[self.loose] <= 0):
            raise IterationLimit("loose variable without curvature in block mode")

        r = rhs[:, None]
        y0 = self._solve_m(r)
        if self.vs:
            v = np.vstack(self.vs)               # (nc, m)
            y = self._solve_m(v.T)               # (m, nc)
            s = np.eye(v.shape[0]) + v @ y
            corr = y @ np.linalg.solve(s, v @ y0)
            y0 = y0 - corr
        return y0[:, 0]


def _assemble(prog, x, t, kkt):
    """Gradient of the barrier and its Hessian loaded into ``kkt``."""
    fval, fgrad, fhess = prog.objective(x)
    grad = -t * np.asarray(fgrad, dtype=float)
    kkt.reset()
    if fhess is not None:
        kind, payload = fhess
        if kind == "diag":
            kkt.add_diag(t * payload)
        elif kind == "dense":
            kkt.add_dense(t * payload)
        elif kind == "blocks":
            kkt.add_blocks(t * payload, prog.blocks)
        else:
            raise ValueError(f"unknown hessian spec {kind!r}")

    for g in prog.groups:
        vals, jac = g.eval(x)
        inv = 1.0 / vals
        grad -= jac.T @ inv
        curv = g.hess_weight(x, inv)
        if curv is not None:
            kind, payload = curv
            if kind == "diag":
                kkt.add_diag(payload)
            elif kind == "dense":
                kkt.add_dense(payload)
            elif kind == "blocks":
                kkt.add_blocks(payload, prog.blocks)
        if g.coupling:
            kkt.add_coupling(jac * inv[:, None])
        else:
            kkt.add_jtwj(jac, inv * inv, row_block=g.row_block, blocks=prog.blocks)

    if prog.lower is not None:
        fin = np.isfinite(prog.lower)
        s = x - prog.lower
        d = np.zeros(prog.dim)
        d[fin] = 1.0 / (s[fin] * s[fin])
        grad[fin] -= 1.0 / s[fin]
        kkt.add_diag(d)
    if prog.upper is not None:
        fin = np.isfinite(prog.upper)
        s = prog.upper - x
        d = np.zeros(prog.dim)
        d[fin] = 1.0 / (s[fin] * s[fin])
        grad[fin] += 1.0 / s[fin]
        kkt.add_diag(d)
    return fval, grad


def maximize_smooth(
    prog: SmoothProgram,
    x0: np.ndarray,
    cfg: SolveConfig = DEFAULT_CONFIG,
    *,
    auto_start: bool = True,
    t0: float = 1.0,
) -> BarrierResult:
    """Maximize a smooth concave program from a strictly feasible start.

    When ``x0`` is not strictly feasible and ``auto_start`` is set, a
    minimum-slack phase produces one first; NoStrictlyFeasibleStart is
    raised if none exists.  The result's objective lies within
    ``cfg.tol_obj * max(1, |value|)`` of the optimum (barrier gap bound).
    """
    x = np.asarray(x0, dtype=float).copy()
    if not _strictly_feasible(prog, x):
        if not auto_start:
            raise NoStrictlyFeasibleStart("start violates a constraint strictly")
        x = feasible_start(prog, x, cfg)

    kkt = _DenseKKT(prog.dim) if prog.blocks is None else _BlockKKT(prog.dim, prog.blocks)
    n_rows = max(prog.n_rows(), 1)
    t = t0
    steps = 0
    stages = 0
    fval = prog.objective(x)[0]
    max_stages = 64

    while True:
        stages += 1
        for _ in range(_MAX_INNER):
            fval, grad = _assemble(prog, x, t, kkt)
            d = kkt.solve(-grad)
            dec2 = float(-grad @ d)
            if dec2 <= 2.0 * cfg.newton_tol:
                break
            steps += 1
            phi0 = _phi(prog, x, t)
            slope = float(grad @ d)
            alpha = 1.0
            while alpha > 1e-14:
                xn = x + alpha * d
                if _phi(prog, xn, t) <= phi0 + _ARMIJO * alpha * slope:
                    break
                alpha *= _BACKTRACK
            else:
                break
            x = xn
        gap = n_rows / t
        if gap <= cfg.tol_obj * max(1.0, abs(fval)):
            converged = True
            break
        if stages >= max_stages:
            converged = False
            break
        t *= cfg.barrier_mu

    fval = float(prog.objective(x)[0])
    mults = []
    for g in prog.groups:
        vals, _ = g.eval(x)
        mults.append(1.0 / (t * vals))
    return BarrierResult(
        x=x,
        value=fval,
        converged=converged,
        newton_steps=steps,
        stages=stages,
        certified_gap=n_rows / t,
        multipliers=mults,
    )


class _SlackedRows:
    """Original rows relaxed by a shared slack variable (phase 1)."""

    def __init__(self, inner, dim, scales):
        self.inner = inner
        self.dim = dim
        self.scales = np.asarray(scales, dtype=float)
        self.nrows = inner.nrows
        self.coupling = False
        self.scale = 1.0
        self.row_block = None

    def eval(self, z):
        vals, jac = self.inner.eval(z[:-1])
        out = np.zeros((self.nrows, self.dim))
        out[:, :-1] = jac
        out[:, -1] = -self.scales
        return vals - z[-1] * self.scales, out

    def hess_weight(self, z, w):
        curv = self.inner.hess_weight(z[:-1], w)
        if curv is None:
            return None
        kind, payload = curv
        if kind == "diag":
            return ("diag", np.append(payload, 0.0))
        if kind == "dense":
            h = np.zeros((self.dim, self.dim))
            h[:-1, :-1] = payload
            return ("dense", h)
        raise ValueError("block curvature unsupported in phase 1")


def feasible_start(
    prog: SmoothProgram, x0: np.ndarray, cfg: SolveConfig = DEFAULT_CONFIG
) -> np.ndarray:
    """Produce a strictly feasible point by maximizing the minimum row slack.

    Every row (and finite box bound) is normalized by its magnitude at
    ``x0`` so heterogeneous units compete fairly.  Raises
    NoStrictlyFeasibleStart when the best achievable slack is nonpositive.
    """
    x0 = np.asarray(x0, dtype=float)
    m = prog.dim
    groups = []
    worst = np.inf
    for g in prog.groups:
        vals, _ = g.eval(x0)
        scales = np.maximum(np.abs(vals), 1.0)
        groups.append(_SlackedRows(g, m + 1, scales))
        worst = min(worst, float(np.min(vals / scales)))

    # Finite box bounds become slacked linear rows.
    for bound, sign in ((prog.lower, 1.0), (prog.upper, -1.0)):
        if bound is None:
            continue
        fin = np.flatnonzero(np.isfinite(bound))
        if fin.size == 0:
            continue
        a = np.zeros((fin.size, m + 1))
        a[np.arange(fin.size), fin] = sign
        b = sign * bound[fin]
        scales = np.maximum(np.abs(sign * x0[fin] - b), 1.0)
        a[:, -1] = -scales
        groups.append(LinearRows(a, b))
        worst = min(worst, float(np.min((sign * x0[fin] - b) / scales)))

    def objective(z):
        grad = np.zeros(m + 1)
        grad[-1] = 1.0
        return z[-1], grad, None

    cap = 2.0
    z0 = np.append(x0, min(worst, cap) - 0.5)
    upper = np.full(m + 1, np.inf)
    upper[-1] = cap
    phase = SmoothProgram(
        dim=m + 1, objective=objective, groups=groups, lower=None, upper=upper
    )
    res = maximize_smooth(
        phase, z0, cfg.updated(tol_obj=1e-3), auto_start=False
    )
    x = res.x[:-1]
    if res.x[-1] <= cfg.tol_feas or not _strictly_feasible(prog, x):
        raise NoStrictlyFeasibleStart(
            f"best normalized slack {res.x[-1]:.3e} is not positive"
        )
    return x
