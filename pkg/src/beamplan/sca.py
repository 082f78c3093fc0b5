"""Finite-horizon planning by alternating convex approximation.

The mission is discretized into equal slots.  Around the current plan, the
received amplitude of each sensor admits a global concave-quadratic lower
model in the waypoint (the amplitude is convex in the squared horizontal
offset), and the coherent sum-squared admits a global linear lower model in
the per-sensor amplitudes.  Substituting the models yields convex trajectory
and power subproblems that are tight at the expansion point, so alternating
them never decreases the objective.

Outage plans get a post-processing chain: slots are sorted by SNR, the
largest servable count is found by bisection over a per-window power
feasibility problem, and unserved slots go silent.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .config import DEFAULT_CONFIG, SolveConfig
from .convex import (
    BudgetRows,
    LinearRows,
    SmoothProgram,
    bisect,
    maximize_smooth,
)
from .errors import ConfigError, InfeasibleHorizon, NoStrictlyFeasibleStart
from .model import (
    LN2,
    DiscretePlan,
    Scenario,
    evaluate_plan,
    gains_at,
)
from .relaxed import HoverPlan, solve_relaxed_outage, solve_relaxed_rate

__all__ = [
    "InitTrajectory",
    "OutagePostResult",
    "ScaAuxiliary",
    "ScaResult",
    "amplitude_lower_bound",
    "coherent_power_lower_bound",
    "init_direct",
    "init_fly_hover_fly",
    "init_successive_hover_fly",
    "local_aux",
    "optimize_powers",
    "optimize_trajectory_only",
    "outage_postprocess",
    "power_subproblem",
    "sca_solve",
    "select_init",
    "surrogate_objective",
    "traj_subproblem",
    "true_objective",
    "write_plan_csv",
    "write_trace_csv",
]

# Sensors with budgets below this are treated as silent (their optimal power
# is within the budget itself of zero).
_DEAD_BUDGET_W = 1e-12

_START_SHRINK = 1e-7   # relative pull-back from binding constraints
_BLEND = 1e-5          # trajectory blend toward the straight path


# ---------------------------------------------------------------------------
# Types.


@dataclass(frozen=True)
class InitTrajectory:
    """A feasible starting trajectory for the alternating solver."""

    kind: str              # "shf" | "fhf" | "direct"
    waypoints: np.ndarray  # (N, 2)
    meta: dict = field(default_factory=dict)


@dataclass(frozen=True)
class ScaAuxiliary:
    """Amplitude surrogates at a local plan: per-sensor a and sum-squared A."""

    a: np.ndarray  # (N, K)
    A: np.ndarray  # (N,)


@dataclass(frozen=True)
class OutagePostResult:
    order: np.ndarray        # slots sorted by SNR descending
    n_served: int
    powers: np.ndarray       # (N, K), zero on unserved slots
    served_mask: np.ndarray  # (N,) bool
    outage_prob: float


@dataclass(frozen=True)
class ScaResult:
    plan: DiscretePlan
    trace: tuple             # rows (round, phase, objective)
    init_kind: str
    converged: bool
    objective: float
    init_plan: Optional[DiscretePlan] = None
    init_objective: Optional[float] = None


# ---------------------------------------------------------------------------
# Amplitude models (shared by both subproblems).


def amplitude_lower_bound(p_watts, scn: Scenario, k: int, q, q_ref) -> float:
    """Global lower bound on sqrt(P * beta0 * d^-alpha) linearized at q_ref.

    Linear in the squared horizontal offset, tight at the expansion point.
    """
    ch = scn.channel
    s = scn.sensor_xy[k]
    u = float(np.sum((np.asarray(q, float) - s) ** 2))
    u0 = float(np.sum((np.asarray(q_ref, float) - s) ** 2))
    d2 = u0 + scn.altitude**2
    root = math.sqrt(p_watts * ch.beta0)
    return root * (
        d2 ** (-ch.alpha / 4.0)
        - ch.alpha * (u - u0) / (4.0 * d2 ** (ch.alpha / 4.0 + 1.0))
    )


def coherent_power_lower_bound(a_sum, a_sum_ref) -> float:
    """Global lower bound on (sum of amplitudes)^2 linearized at a reference."""
    return a_sum_ref * a_sum_ref + 2.0 * a_sum_ref * (a_sum - a_sum_ref)


def local_aux(plan: DiscretePlan, scn: Scenario) -> ScaAuxiliary:
    """Auxiliaries at a plan: true amplitudes, capped sum-squared in outage mode."""
    g = gains_at(plan.waypoints, scn)
    a = np.sqrt(plan.powers * g)
    s = a.sum(axis=1)
    big_a = s * s
    if scn.gamma_min is not None:
        big_a = np.minimum(big_a, scn.gamma_min * scn.channel.sigma2)
    return ScaAuxiliary(a=a, A=big_a)


def _amp_quadratic_model(plan: DiscretePlan, scn: Scenario):
    """Per-slot coefficients of the amplitude model around the plan.

    For slot n the modelled coherent bound is
        Phi_n(q) = const_n - 2 S_n (F_n |q|^2 - 2 m_n . q)
    with S_n the local amplitude sum; returns (S, const, F, m).
    """
    ch = scn.channel
    g = gains_at(plan.waypoints, scn)                  # (N, K)
    a = np.sqrt(plan.powers * g)                       # local amplitudes
    s_loc = a.sum(axis=1)                              # (N,)
    off = plan.waypoints[:, None, :] - scn.sensor_xy[None, :, :]
    u0 = np.einsum("nkj,nkj->nk", off, off)            # squared offsets
    d2 = u0 + scn.altitude**2
    root = np.sqrt(plan.powers * ch.beta0)
    f = root * ch.alpha / (4.0 * d2 ** (ch.alpha / 4.0 + 1.0))
    e = root * d2 ** (-ch.alpha / 4.0) + f * u0
    f_sum = f.sum(axis=1)                              # (N,)
    m_vec = f @ scn.sensor_xy                          # (N, 2)
    s_norm2 = np.einsum("kj,kj->k", scn.sensor_xy, scn.sensor_xy)
    const = (
        2.0 * s_loc * (e.sum(axis=1) - f @ s_norm2)
        - s_loc * s_loc
    )
    return s_loc, const, f_sum, m_vec


# ---------------------------------------------------------------------------
# Initial trajectories.


def _sample_path(knots_t, knots_xy, scn: Scenario, cfg: SolveConfig):
    """Sample a piecewise-linear time-position path at the slot grid."""
    n = cfg.n_slots
    times = np.arange(1, n + 1) * (scn.horizon / n)
    t = np.asarray(knots_t, dtype=float)
    xy = np.asarray(knots_xy, dtype=float)
    x = np.interp(times, t, xy[:, 0])
    y = np.interp(times, t, xy[:, 1])
    return np.column_stack([x, y])


def _uniform_powers(scn: Scenario, n: int) -> np.ndarray:
    return np.tile(scn.p_avg, (n, 1))


def _plan_from_waypoints(wp, scn, cfg) -> DiscretePlan:
    return DiscretePlan(
        n_slots=cfg.n_slots,
        slot_len=scn.horizon / cfg.n_slots,
        waypoints=wp,
        powers=_uniform_powers(scn, cfg.n_slots),
    )


def init_fly_hover_fly(scn: Scenario, cfg: SolveConfig = DEFAULT_CONFIG):
    """Straight flight to the best fixed hover point, hover, straight flight out.

    The fixed point maximizes the received SNR over the flight-region grid
    with every sensor at its full budget.
    """
    if scn.horizon <= 0:
        raise ConfigError("finite-horizon planning needs a positive horizon")
    nodes = scn.region.grid_nodes(cfg.grid_step_m)
    amp = np.sqrt(gains_at(nodes, scn) * scn.p_avg).sum(axis=1)
    q_fix = nodes[int(np.argmax(amp))]
    t1 = float(np.linalg.norm(q_fix - scn.q_init)) / scn.v_max
    t2 = float(np.linalg.norm(scn.q_final - q_fix)) / scn.v_max
    if t1 + t2 > scn.horizon * (1 + 1e-12) + 1e-12:
        raise InfeasibleHorizon(
            f"fly-hover-fly needs {t1 + t2:.3f} s, horizon is {scn.horizon} s"
        )
    t_leave = max(t1, scn.horizon - t2)
    knots_t = [0.0, t1, t_leave, scn.horizon]
    knots_xy = [scn.q_init, q_fix, q_fix, scn.q_final]
    wp = _sample_path(knots_t, knots_xy, scn, cfg)
    return InitTrajectory(
        kind="fhf",
        waypoints=wp,
        meta={"hover_point": q_fix, "fly_time_s": t1 + t2},
    )


def _tour_order(points, q_init, q_final, max_exhaustive=8):
    n = len(points)
    if n <= max_exhaustive:
        best = None
        best_len = np.inf
        for perm in itertools.permutations(range(n)):
            path = [q_init] + [points[i] for i in perm] + [q_final]
            length = sum(
                float(np.linalg.norm(path[i + 1] - path[i]))
                for i in range(len(path) - 1)
            )
            if length < best_len - 1e-12:
                best_len = length
                best = perm
        return list(best), best_len, True
    # Nearest neighbour plus 2-opt polish for large point sets.
    remaining = list(range(n))
    order = []
    cur = q_init
    while remaining:
        j = min(remaining, key=lambda i: float(np.linalg.norm(points[i] - cur)))
        order.append(j)
        remaining.remove(j)
        cur = points[j]

    def tour_len(o):
        path = [q_init] + [points[i] for i in o] + [q_final]
        return sum(
            float(np.linalg.norm(path[i + 1] - path[i]))
            for i in range(len(path) - 1)
        )

    improved = True
    while improved:
        improved = False
        for i in range(n - 1):
            for j in range(i + 1, n):
                cand = order[:i] + order[i : j + 1][::-1] + order[j + 1 :]
                if tour_len(cand) < tour_len(order) - 1e-12:
                    order = cand
                    improved = True
    return order, tour_len(order), False


def init_successive_hover_fly(
    scn: Scenario, hover: HoverPlan, cfg: SolveConfig = DEFAULT_CONFIG
):
    """Visit every relaxed hover point along the shortest tour, then finish.

    Hover durations are the relaxed ones rescaled to the time left after
    flying; the tour is exact for up to eight points and nearest-neighbour
    with 2-opt beyond that (flagged in the metadata).
    """
    if scn.horizon <= 0:
        raise ConfigError("finite-horizon planning needs a positive horizon")
    pts = hover.active_points()
    if not pts:
        raise ConfigError("relaxed plan has no hover points to visit")
    locs = [p.location for p in pts]
    order, fly_len, optimal = _tour_order(locs, scn.q_init, scn.q_final)
    t_fly = fly_len / scn.v_max
    if t_fly > scn.horizon * (1 + 1e-12) + 1e-12:
        raise InfeasibleHorizon(
            f"hover tour needs {t_fly:.3f} s, horizon is {scn.horizon} s"
        )
    t_hov = scn.horizon - t_fly
    durs = np.array([pts[i].duration for i in order], dtype=float)
    durs = durs * (t_hov / durs.sum()) if durs.sum() > 0 else np.full(
        len(order), t_hov / len(order)
    )

    knots_t = [0.0]
    knots_xy = [scn.q_init]
    cur = scn.q_init
    t = 0.0
    for idx, i in enumerate(order):
        p = locs[i]
        t += float(np.linalg.norm(p - cur)) / scn.v_max
        knots_t.append(t)
        knots_xy.append(p)
        t += durs[idx]
        knots_t.append(t)
        knots_xy.append(p)
        cur = p
    knots_t.append(scn.horizon)
    knots_xy.append(scn.q_final)
    wp = _sample_path(knots_t, knots_xy, scn, cfg)
    return InitTrajectory(
        kind="shf",
        waypoints=wp,
        meta={
            "visit_order": order,
            "fly_time_s": t_fly,
            "tour_optimal": optimal,
        },
    )


def init_direct(scn: Scenario, cfg: SolveConfig = DEFAULT_CONFIG):
    """Constant-speed straight line from start to finish."""
    if scn.horizon <= 0:
        raise ConfigError("finite-horizon planning needs a positive horizon")
    n = cfg.n_slots
    frac = np.arange(1, n + 1)[:, None] / n
    wp = scn.q_init[None, :] * (1 - frac) + scn.q_final[None, :] * frac
    return InitTrajectory(kind="direct", waypoints=wp, meta={})


# ---------------------------------------------------------------------------
# Objectives.


def surrogate_objective(plan: DiscretePlan, mode: str, scn: Scenario) -> float:
    """Quantity the alternating solver monotonically improves.

    Rate mode: the true time-averaged rate.  Outage mode: the mean
    threshold-capped SNR (serving more slots at the threshold raises it).
    """
    metrics = evaluate_plan(plan, scn)
    if mode == "rate":
        return metrics.avg_rate
    gamma = scn.require_gamma()
    return float(np.minimum(metrics.per_slot_snr, gamma).mean())


def true_objective(
    plan: DiscretePlan, mode: str, scn: Scenario, cfg: SolveConfig = DEFAULT_CONFIG
) -> float:
    """Figure of merit used to compare plans: avg rate, or outage after
    post-processing."""
    if mode == "rate":
        return evaluate_plan(plan, scn).avg_rate
    return outage_postprocess(plan, scn, cfg).outage_prob


# ---------------------------------------------------------------------------
# Trajectory subproblem.


class _SpeedRows:
    """Per-slot step-length caps g_n = cap^2 - |q_n - q_{n-1}|^2 >= 0."""

    def __init__(self, scn, n_slots, dim):
        self.cap2 = (scn.v_max * scn.horizon / n_slots) ** 2
        self.q_init = scn.q_init
        self.q_final = scn.q_final
        self.n = n_slots
        self.dim = dim
        self.nrows = n_slots
        self.coupling = False
        self.scale = max(self.cap2, 1e-12)
        self.row_block = None

    def _points(self, x):
        q = x[: 2 * (self.n - 1)].reshape(-1, 2)
        return np.vstack([self.q_init, q, self.q_final])

    def eval(self, x):
        pts = self._points(x)
        d = np.diff(pts, axis=0)                      # (n, 2)
        vals = self.cap2 - np.einsum("ij,ij->i", d, d)
        jac = np.zeros((self.n, self.dim))
        for i in range(self.n):
            if i + 1 <= self.n - 1:                   # q_{i+1} is free
                jac[i, 2 * i : 2 * i + 2] = -2.0 * d[i]
            if i >= 1:                                # q_i is free
                jac[i, 2 * (i - 1) : 2 * i] = 2.0 * d[i]
        return vals, jac

    def hess_weight(self, x, w):
        h = np.zeros((self.dim, self.dim))
        for i in range(self.n):
            cur = slice(2 * i, 2 * i + 2) if i + 1 <= self.n - 1 else None
            prev = slice(2 * (i - 1), 2 * i) if i >= 1 else None
            if cur is not None:
                h[cur, cur] += 2.0 * w[i] * np.eye(2)
            if prev is not None:
                h[prev, prev] += 2.0 * w[i] * np.eye(2)
            if cur is not None and prev is not None:
                h[cur, prev] -= 2.0 * w[i] * np.eye(2)
                h[prev, cur] -= 2.0 * w[i] * np.eye(2)
        return ("dense", h)


class _CoherentCapRows:
    """Rows A_j <= Phi_j(q_j): modelled coherent power caps the auxiliaries."""

    def __init__(self, slots, s_loc, const, f_sum, m_vec, nq, dim):
        self.slots = slots          # indices into the free-waypoint array
        self.s = s_loc
        self.const = const
        self.f = f_sum
        self.m = m_vec
        self.nq = nq                # number of q coordinates
        self.dim = dim
        self.nrows = len(slots)
        self.coupling = False
        self.scale = 1.0
        self.row_block = None

    def eval(self, x):
        q = x[: self.nq].reshape(-1, 2)[self.slots]
        a = x[self.nq :]
        qq = np.einsum("ij,ij->i", q, q)
        mq = np.einsum("ij,ij->i", q, self.m)
        phi = self.const - 2.0 * self.s * (self.f * qq - 2.0 * mq)
        jac = np.zeros((self.nrows, self.dim))
        dphi = -4.0 * self.s[:, None] * (self.f[:, None] * q - self.m)
        for r, j in enumerate(self.slots):
            jac[r, 2 * j : 2 * j + 2] = dphi[r]
            jac[r, self.nq + r] = -1.0
        return phi - a, jac

    def hess_weight(self, x, w):
        d = np.zeros(self.dim)
        add = 4.0 * self.s * self.f * w
        for r, j in enumerate(self.slots):
            d[2 * j : 2 * j + 2] += add[r]
        return ("diag", d)


def traj_subproblem(
    plan: DiscretePlan,
    mode: str,
    scn: Scenario,
    cfg: SolveConfig = DEFAULT_CONFIG,
    aux: Optional[ScaAuxiliary] = None,
) -> DiscretePlan:
    """One convexified trajectory update at the plan's expansion point.

    Powers stay fixed; waypoints move under the step-length chain while the
    modelled objective (which lower-bounds the true one and is tight at the
    current plan) is maximized.  Returns the plan unchanged when no strictly
    feasible interior exists or the update would not improve it.
    """
    n = plan.n_slots
    if n < 2:
        return plan
    s_loc, const, f_sum, m_vec = _amp_quadratic_model(plan, scn)
    free = n - 1
    nq = 2 * free
    active = np.flatnonzero(s_loc[:free] > 0.0)
    sigma2 = scn.channel.sigma2

    x0 = plan.waypoints[:free].ravel().copy()
    direct = init_direct(scn, cfg).waypoints[:free].ravel()
    x0 = (1.0 - _BLEND) * x0 + _BLEND * direct

    if mode == "rate":
        dim = nq
        groups = [_SpeedRows(scn, n, dim)]
        sa = s_loc[active]
        ca = const[active]
        fa = f_sum[active]
        ma = m_vec[active]
        w_slot = 1.0 / (n * LN2)

        def objective(x):
            q = x[:nq].reshape(-1, 2)[active]
            qq = np.einsum("ij,ij->i", q, q)
            mq = np.einsum("ij,ij->i", q, ma)
            phi = ca - 2.0 * sa * (fa * qq - 2.0 * mq)
            arg = 1.0 + phi / sigma2
            if np.any(arg <= 0.0):
                return -np.inf, np.zeros(dim), None
            val = w_slot * float(np.log(arg).sum())
            dphi = -4.0 * sa[:, None] * (fa[:, None] * q - ma)
            dcoef = w_slot / (sigma2 * arg)
            grad = np.zeros(dim)
            h = np.zeros((dim, dim))
            for r, j in enumerate(active):
                block = slice(2 * j, 2 * j + 2)
                grad[block] = dcoef[r] * dphi[r]
                hb = (4.0 * sa[r] * fa[r] * dcoef[r]) * np.eye(2) + (
                    dcoef[r] ** 2 / w_slot
                ) * np.outer(dphi[r], dphi[r])
                h[block, block] += hb
            return val, grad, ("dense", h)

        prog = SmoothProgram(dim=dim, objective=objective, groups=groups)
    else:
        gamma = scn.require_gamma()
        cap = gamma * sigma2
        dim = nq + active.size
        groups = [
            _SpeedRows(scn, n, dim),
            _CoherentCapRows(
                active, s_loc[active], const[active], f_sum[active],
                m_vec[active], nq, dim,
            ),
        ]
        upper = np.full(dim, np.inf)
        upper[nq:] = cap
        grad_const = np.zeros(dim)
        grad_const[nq:] = 1.0 / (n * sigma2)

        def objective(x):
            return float(grad_const @ x), grad_const, None

        # Strictly feasible auxiliary start just below both caps.
        rows = groups[1]
        phi0, _ = rows.eval(np.concatenate([x0, np.zeros(active.size)]))
        a0 = np.minimum(phi0 * (1 - 1e-9) - 1e-12, cap * (1 - 1e-9))
        x0 = np.concatenate([x0, a0])
        prog = SmoothProgram(
            dim=dim, objective=objective, groups=groups, upper=upper
        )

    before = surrogate_objective(plan, mode, scn)
    try:
        res = maximize_smooth(prog, x0, cfg, auto_start=True)
    except NoStrictlyFeasibleStart:
        return plan
    wp = plan.waypoints.copy()
    wp[:free] = res.x[:nq].reshape(-1, 2)
    updated = plan.with_waypoints(wp)
    if surrogate_objective(updated, mode, scn) < before:
        return plan
    return updated


# ---------------------------------------------------------------------------
# Power subproblem.


def _power_layout(plan, scn):
    """Active slots/sensors and the per-slot amplitude-per-sqrt-watt matrix."""
    g = gains_at(plan.waypoints, scn)
    a = np.sqrt(plan.powers * g)
    s_loc = a.sum(axis=1)
    slots = np.flatnonzero(s_loc > 0.0)
    sensors = np.flatnonzero(scn.p_avg > _DEAD_BUDGET_W)
    c = np.sqrt(g[np.ix_(slots, sensors)])
    return slots, sensors, c, s_loc


def power_subproblem(
    plan: DiscretePlan,
    mode: str,
    scn: Scenario,
    cfg: SolveConfig = DEFAULT_CONFIG,
    aux: Optional[ScaAuxiliary] = None,
) -> DiscretePlan:
    """One convexified power update at the plan's expansion point.

    Waypoints stay fixed; amplitudes (square roots of powers) move under the
    per-sensor average-power budgets.  Solved block-wise: the modelled
    objective separates per slot and only the budget rows couple slots.
    """
    n = plan.n_slots
    slots, sensors, c, s_loc = _power_layout(plan, scn)
    if slots.size == 0 or sensors.size == 0:
        return plan
    ns, nk = slots.size, sensors.size
    sigma2 = scn.channel.sigma2
    sa = s_loc[slots]

    blocks_b, dim, a_cols = _power_blocks(mode, ns, nk)
    budget_cols = np.stack(
        [blocks_b[:, k] for k in range(nk)]
    )  # (nk, ns): variable ids of sensor k across slots
    budgets = BudgetRows(
        cols=budget_cols,
        coeff=1.0 / n,
        caps=scn.p_avg[sensors],
        dim=dim,
    )

    b0 = np.sqrt(plan.powers[np.ix_(slots, sensors)]) * (1.0 - _START_SHRINK)
    b0 = np.maximum(b0, 1e-9 * np.sqrt(scn.p_avg[sensors])[None, :])
    lower = np.full(dim, -np.inf)
    lower[blocks_b.ravel()] = 0.0

    if mode == "rate":
        w_slot = 1.0 / (n * LN2)

        def objective(x):
            b = x[blocks_b]                    # (ns, nk)
            u = np.einsum("nk,nk->n", c, b)
            phi = 2.0 * sa * u - sa * sa
            arg = 1.0 + phi / sigma2
            if np.any(arg <= 0.0):
                return -np.inf, np.zeros(dim), None
            val = w_slot * float(np.log(arg).sum())
            dcoef = w_slot * 2.0 * sa / (sigma2 * arg)      # (ns,)
            grad = np.zeros(dim)
            grad[blocks_b.ravel()] = (dcoef[:, None] * c).ravel()
            coef2 = w_slot * (2.0 * sa) ** 2 / (sigma2 * arg) ** 2
            stack = np.einsum("n,ni,nj->nij", coef2, c, c)
            return val, grad, ("blocks", stack)

        prog = SmoothProgram(
            dim=dim,
            objective=objective,
            groups=[budgets],
            lower=lower,
            blocks=blocks_b,
        )
        x0 = np.zeros(dim)
        x0[blocks_b.ravel()] = b0.ravel()
    else:
        gamma = scn.require_gamma()
        cap = gamma * sigma2
        # Rows: 2 s_n u_n - s_n^2 - A_n >= 0 (constant Jacobian).
        a_mat = np.zeros((ns, dim))
        rows = np.repeat(np.arange(ns), nk)
        a_mat[rows, blocks_b.ravel()] = (2.0 * sa[:, None] * c).ravel()
        a_mat[np.arange(ns), a_cols] = -1.0
        cap_rows = LinearRows(
            a_mat, sa * sa, row_block=np.arange(ns), scale=max(cap, 1e-30)
        )
        upper = np.full(dim, np.inf)
        upper[a_cols] = cap
        grad_const = np.zeros(dim)
        grad_const[a_cols] = 1.0 / (n * sigma2)

        def objective(x):
            return float(grad_const @ x), grad_const, None

        prog = SmoothProgram(
            dim=dim,
            objective=objective,
            groups=[cap_rows, budgets],
            lower=lower,
            upper=upper,
            blocks=np.column_stack([blocks_b, a_cols]),
        )
        x0 = np.zeros(dim)
        x0[blocks_b.ravel()] = b0.ravel()
        u0 = np.einsum("nk,nk->n", c, b0)
        row0 = 2.0 * sa * u0 - sa * sa
        x0[a_cols] = np.minimum(row0 * (1 - 1e-9) - 1e-12, cap * (1 - 1e-9))

    before = surrogate_objective(plan, mode, scn)
    try:
        res = maximize_smooth(prog, x0, cfg, auto_start=True)
    except NoStrictlyFeasibleStart:
        return plan
    b = res.x[blocks_b]
    powers = np.zeros_like(plan.powers)
    powers[np.ix_(slots, sensors)] = b * b
    updated = plan.with_powers(powers)
    if surrogate_objective(updated, mode, scn) < before:
        return plan
    return updated


def _power_blocks(mode, ns, nk):
    if mode == "rate":
        blocks_b = np.arange(ns * nk).reshape(ns, nk)
        return blocks_b, ns * nk, None
    per = nk + 1
    base = np.arange(ns)[:, None] * per
    blocks_b = base + np.arange(nk)[None, :]
    a_cols = np.arange(ns) * per + nk
    return blocks_b, ns * per, a_cols


def optimize_powers(
    plan: DiscretePlan,
    mode: str,
    scn: Scenario,
    cfg: SolveConfig = DEFAULT_CONFIG,
    max_iters: int = 25,
) -> DiscretePlan:
    """Iterate the power update (refreshing its expansion point) to a fixed point."""
    obj = surrogate_objective(plan, mode, scn)
    for _ in range(max_iters):
        plan = power_subproblem(plan, mode, scn, cfg)
        new = surrogate_objective(plan, mode, scn)
        if new - obj <= cfg.sca_tol * max(1.0, abs(obj)):
            return plan
        obj = new
    return plan


def optimize_trajectory_only(
    plan: DiscretePlan,
    mode: str,
    scn: Scenario,
    cfg: SolveConfig = DEFAULT_CONFIG,
    max_iters: Optional[int] = None,
) -> DiscretePlan:
    """Iterate the trajectory update with powers held fixed."""
    cap = max_iters if max_iters is not None else cfg.sca_max_rounds
    obj = surrogate_objective(plan, mode, scn)
    for _ in range(cap):
        plan = traj_subproblem(plan, mode, scn, cfg)
        new = surrogate_objective(plan, mode, scn)
        if new - obj <= cfg.sca_tol * max(1.0, abs(obj)):
            return plan
        obj = new
    return plan


# ---------------------------------------------------------------------------
# Initialization choice and the alternating loop.


def select_init(
    scn: Scenario,
    candidates,
    mode: str,
    cfg: SolveConfig = DEFAULT_CONFIG,
):
    """Power-optimize each candidate trajectory and keep the best true objective.

    Ties keep the earlier candidate, so the caller's ordering is the
    preference order.
    """
    if not candidates:
        raise ConfigError("select_init needs at least one candidate")
    best = None
    best_obj = None
    best_kind = None
    for cand in candidates:
        plan = _plan_from_waypoints(cand.waypoints, scn, cfg)
        plan = optimize_powers(plan, mode, scn, cfg)
        obj = true_objective(plan, mode, scn, cfg)
        better = (
            best is None
            or (mode == "rate" and obj > best_obj + 1e-12)
            or (mode == "outage" and obj < best_obj - 1e-12)
        )
        if better:
            best, best_obj, best_kind = plan, obj, cand.kind
    return best, best_kind, best_obj


def _gather_inits(scn, mode, cfg, relaxed_plan):
    cands = []
    if relaxed_plan is not None:
        try:
            cands.append(init_successive_hover_fly(scn, relaxed_plan, cfg))
        except (InfeasibleHorizon, ConfigError):
            pass
    try:
        cands.append(init_fly_hover_fly(scn, cfg))
    except InfeasibleHorizon:
        pass
    cands.append(init_direct(scn, cfg))
    return cands


def sca_solve(
    scn: Scenario,
    mode: str,
    cfg: SolveConfig = DEFAULT_CONFIG,
    relaxed_plan: Optional[HoverPlan] = None,
) -> ScaResult:
    """Alternate trajectory and power updates from the best initialization.

    ``relaxed_plan`` seeds the successive hover-and-fly candidate; when
    omitted it is computed with the matching relaxed solver.  The returned
    plan is the converged surrogate solution; outage callers feed it to
    :func:`outage_postprocess` for the final on-off powers.
    """
    if mode not in ("rate", "outage"):
        raise ConfigError(f"unknown mode {mode!r}")
    if relaxed_plan is None:
        if mode == "rate":
            relaxed_plan, _ = solve_relaxed_rate(scn, cfg)
        else:
            relaxed_plan, _ = solve_relaxed_outage(scn, cfg)
    inits = _gather_inits(scn, mode, cfg, relaxed_plan)
    plan, kind, init_obj = select_init(scn, inits, mode, cfg)
    init_plan = plan

    obj = surrogate_objective(plan, mode, scn)
    trace = [(0, "init", obj)]
    converged = False
    for rnd in range(1, cfg.sca_max_rounds + 1):
        plan = traj_subproblem(plan, mode, scn, cfg)
        trace.append((rnd, "traj", surrogate_objective(plan, mode, scn)))
        plan = power_subproblem(plan, mode, scn, cfg)
        new = surrogate_objective(plan, mode, scn)
        trace.append((rnd, "power", new))
        if new - obj <= cfg.sca_tol * max(1.0, abs(obj)):
            obj = new
            converged = True
            break
        obj = new
    return ScaResult(
        plan=plan,
        trace=tuple(trace),
        init_kind=kind,
        converged=converged,
        objective=obj,
        init_plan=init_plan,
        init_objective=init_obj,
    )


# ---------------------------------------------------------------------------
# Outage post-processing: slot sorting, window feasibility, served count.


def _window_feasible(order, n_serve, plan, scn, cfg):
    """Feasibility of serving the first ``n_serve`` sorted slots.

    Maximizes the worst served-slot amplitude under the mission-averaged
    budgets; feasible when it reaches the threshold amplitude with a hair of
    margin, so recomputed SNRs never undershoot the threshold.
    """
    gamma = scn.require_gamma()
    sigma2 = scn.channel.sigma2
    g0 = math.sqrt(gamma * sigma2)
    if n_serve == 0:
        return True, np.zeros_like(plan.powers)
    serve = order[:n_serve]
    sensors = np.flatnonzero(scn.p_avg > _DEAD_BUDGET_W)
    nk = sensors.size
    if nk == 0:
        return False, np.zeros_like(plan.powers)
    c = np.sqrt(gains_at(plan.waypoints[serve], scn)[:, sensors])
    ns = n_serve
    dim = ns * nk + 1
    s_col = ns * nk
    blocks = np.arange(ns * nk).reshape(ns, nk)

    a_mat = np.zeros((ns, dim))
    rows = np.repeat(np.arange(ns), nk)
    a_mat[rows, blocks.ravel()] = c.ravel()
    a_mat[:, s_col] = -1.0
    amp_rows = LinearRows(a_mat, np.zeros(ns), coupling=True, scale=g0)
    budgets = BudgetRows(
        cols=np.stack([blocks[:, k] for k in range(nk)]),
        coeff=1.0 / plan.n_slots,
        caps=scn.p_avg[sensors],
        dim=dim,
    )
    lower = np.zeros(dim)
    upper = np.full(dim, np.inf)
    upper[s_col] = 4.0 * g0

    grad = np.zeros(dim)
    grad[s_col] = 1.0

    def objective(x):
        return float(x[s_col]), grad, None

    prog = SmoothProgram(
        dim=dim,
        objective=objective,
        groups=[amp_rows, budgets],
        lower=lower,
        upper=upper,
        blocks=blocks,
    )
    rho0 = 0.5 * np.sqrt(
        scn.p_avg[sensors][None, :] * plan.n_slots / (ns * max(nk, 1))
    ) * np.ones((ns, nk))
    x0 = np.zeros(dim)
    x0[blocks.ravel()] = rho0.ravel()
    s0 = 0.5 * float(np.einsum("nk,nk->n", c, rho0).min())
    x0[s_col] = min(max(s0, 1e-12), 2.0 * g0)
    res = maximize_smooth(
        prog, x0, cfg.updated(tol_obj=min(cfg.tol_obj, 1e-9)), auto_start=True
    )
    feasible = res.x[s_col] >= g0 * (1.0 + 1e-9)
    powers = np.zeros_like(plan.powers)
    if feasible:
        rho = res.x[blocks]
        powers[np.ix_(serve, sensors)] = rho * rho
        # Defensive snap: lift any slot that rounds below the threshold.
        g = gains_at(plan.waypoints[serve], scn)
        amp = np.sqrt(powers[serve] * g).sum(axis=1)
        snrs = amp * amp / sigma2
        lift = np.maximum(1.0, gamma * (1.0 + 1e-12) / snrs)
        powers[serve] *= lift[:, None]
    return bool(feasible), powers


def outage_postprocess(
    plan: DiscretePlan, scn: Scenario, cfg: SolveConfig = DEFAULT_CONFIG
) -> OutagePostResult:
    """Serve as many best-SNR slots as the budgets allow; silence the rest.

    Slots are ranked by the surrogate plan's SNR; the served count is the
    largest prefix for which threshold powers fit the mission-averaged
    budgets (monotone, found by bisection and verified at the boundary;
    falls back to a linear scan if the boundary check ever fails).
    """
    metrics = evaluate_plan(plan, scn)
    snrs = metrics.per_slot_snr
    order = np.lexsort((np.arange(plan.n_slots), -snrs))
    cache = {}

    def feasible(n_serve):
        if n_serve not in cache:
            cache[n_serve] = _window_feasible(order, int(n_serve), plan, scn, cfg)
        return cache[n_serve][0]

    n_star = bisect(feasible, 0, plan.n_slots, integer=True)
    if n_star < plan.n_slots and feasible(n_star + 1):
        while n_star < plan.n_slots and feasible(n_star + 1):
            n_star += 1
    _, powers = cache[n_star]
    mask = np.zeros(plan.n_slots, dtype=bool)
    mask[order[:n_star]] = True
    return OutagePostResult(
        order=order,
        n_served=int(n_star),
        powers=powers,
        served_mask=mask,
        outage_prob=1.0 - n_star / plan.n_slots,
    )


# ---------------------------------------------------------------------------
# Serialization.


def write_plan_csv(plan: DiscretePlan, scn: Scenario, fh) -> None:
    """Per-slot CSV: index, time, waypoint, powers, SNR, rate, outage flag."""
    close = False
    if isinstance(fh, (str, bytes)) or hasattr(fh, "__fspath__"):
        fh = open(fh, "w", encoding="utf-8", newline="")
        close = True
    try:
        metrics = evaluate_plan(plan, scn)
        k = plan.powers.shape[1]
        cols = (
            ["n", "t_s", "x_m", "y_m"]
            + [f"p{i + 1}_w" for i in range(k)]
            + ["snr_linear", "rate_bpshz", "outage_flag"]
        )
        fh.write(",".join(cols) + "\n")
        for i in range(plan.n_slots):
            s = metrics.per_slot_snr[i]
            flag = ""
            if scn.gamma_min is not None:
                flag = "1" if s < scn.gamma_min else "0"
            row = (
                [str(i + 1), repr((i + 1) * plan.slot_len)]
                + [repr(float(v)) for v in plan.waypoints[i]]
                + [repr(float(v)) for v in plan.powers[i]]
                + [repr(float(s)), repr(float(math.log1p(s) / LN2)), flag]
            )
            fh.write(",".join(row) + "\n")
    finally:
        if close:
            fh.close()


def write_trace_csv(trace, fh) -> None:
    close = False
    if isinstance(fh, (str, bytes)) or hasattr(fh, "__fspath__"):
        fh = open(fh, "w", encoding="utf-8", newline="")
        close = True
    try:
        fh.write("round,phase,objective\n")
        for rnd, phase, obj in trace:
            fh.write(f"{rnd},{phase},{obj!r}\n")
    finally:
        if close:
            fh.close()
