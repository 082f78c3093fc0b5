"""Speed-unconstrained planning by Lagrange duality.

With the kinematics relaxed, both objectives decompose over time instants:
the dual of the per-sensor average-power coupling gives closed-form inner
solutions at every candidate hover location, a 2D exhaustive search over the
flight region picks the best location(s), an ellipsoid method drives the
dual variables, and a small time-sharing LP recovers the primal hover plan.
The optimal trajectory is a finite set of hover points.
"""

from __future__ import annotations

import enum
import io
import json
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .config import DEFAULT_CONFIG, SolveConfig
from .convex import LinearProgram, ellipsoid_optimize, solve_lp
from .errors import ConfigError, NoSignChange
from .model import LN2, POWER_SLACK_W, Scenario, gains_at

__all__ = [
    "CaseFlag",
    "DualSolveReport",
    "HoverPlan",
    "HoverPoint",
    "InnerSolution",
    "PlanningGrid",
    "check_hover_plan",
    "hover_objective",
    "outage_dual_solve",
    "outage_inner_power",
    "outage_location_search",
    "outage_scale_bisection",
    "outage_timeshare",
    "rate_dual_solve",
    "rate_inner_power",
    "rate_location_search",
    "rate_timeshare",
    "read_hover_csv",
    "solve_relaxed_outage",
    "solve_relaxed_rate",
    "write_hover_csv",
    "write_report_json",
]

# Relative headroom added when snapping threshold-meeting powers upward, so a
# recomputed SNR never lands strictly below the threshold through rounding.
_SNAP = 1e-10


# ---------------------------------------------------------------------------
# Types.


@dataclass(frozen=True)
class InnerSolution:
    """Best per-instant decision at one hover location for fixed dual prices."""

    location: np.ndarray       # (2,)
    powers: np.ndarray         # (K,) watts
    inner_value: float
    p_total_tilde: Optional[float] = None  # rate mode: total priced power


@dataclass(frozen=True)
class HoverPoint:
    location: np.ndarray
    duration: float
    powers: np.ndarray


@dataclass(frozen=True)
class HoverPlan:
    """Primal solution of a relaxed problem: hover points plus an idle share.

    ``objective`` is the average rate (bps/Hz) in rate mode and the outage
    probability in outage mode.  ``outage_duration`` is zero in rate mode.
    """

    points: tuple
    outage_duration: float
    objective: float
    mode: str  # "rate" | "outage"

    def total_time(self) -> float:
        return self.outage_duration + sum(p.duration for p in self.points)

    def active_points(self, eps: float = 1e-12):
        return [p for p in self.points if p.duration > eps]

    def serving_points(self, eps: float = 1e-12):
        """Active points that actually transmit (excludes zero-power idling)."""
        return [p for p in self.active_points(eps) if np.any(p.powers > 0.0)]


@dataclass(frozen=True)
class DualSolveReport:
    dual_point: np.ndarray
    dual_value: float
    iterations: int
    subgradient_norm_history: np.ndarray
    converged: bool
    certified_gap: float = math.inf
    polish_rounds: int = 0


class CaseFlag(enum.Enum):
    """Outcome of comparing the serving cost against the idle branch."""

    NON_OUTAGE_CHEAPER = "non_outage_cheaper"
    TIE = "tie"
    OUTAGE_CHEAPER = "outage_cheaper"


class PlanningGrid:
    """Grid nodes of the flight region with per-node channel power gains.

    Nodes are kept in (x, y)-lexicographic order so that argmax picks the
    lexicographically smallest location on exact ties.
    """

    def __init__(self, scn: Scenario, step: float):
        self.step = float(step)
        self.nodes = scn.region.grid_nodes(step)
        self.gains = gains_at(self.nodes, scn)

    def __len__(self):
        return self.nodes.shape[0]


def _validate_dual(v: np.ndarray, scn: Scenario, cfg: SolveConfig) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    if v.shape != (scn.n_sensors,):
        raise ConfigError("dual vector length must equal the sensor count")
    if np.any(v < cfg.dual_lower_bound * (1 - 1e-12)):
        raise ConfigError("dual variables must stay above the positivity floor")
    return v


# ---------------------------------------------------------------------------
# Rate mode: water-filling inner solutions.


def _rate_values(gains: np.ndarray, lam: np.ndarray, sigma2: float):
    """Vectorized best value of rate - priced power at each node."""
    hbh = gains @ (1.0 / lam)
    ptil = np.maximum(0.0, 1.0 / LN2 - sigma2 / hbh)
    vals = np.where(ptil > 0.0, np.log1p(ptil * hbh / sigma2) / LN2 - ptil, 0.0)
    return vals, ptil, hbh


def _rate_powers(gain_row: np.ndarray, lam: np.ndarray, ptil: float, hbh: float):
    if ptil <= 0.0:
        return np.zeros_like(lam)
    return ptil * (gain_row / lam**2) / hbh


def rate_inner_power(lam, q, scn: Scenario, cfg: SolveConfig = DEFAULT_CONFIG):
    """Optimal sensor powers at one hover location for dual prices ``lam``.

    The total priced power follows the water-filling form
    ``max(0, 1/ln2 - sigma^2 / sum_k(gain_k / lam_k))`` and is split across
    sensors proportionally to ``gain_k / lam_k^2``.
    """
    lam = _validate_dual(lam, scn, cfg)
    grow = gains_at(np.asarray(q, dtype=float)[None, :], scn)[0]
    vals, ptil, hbh = _rate_values(grow[None, :], lam, scn.channel.sigma2)
    powers = _rate_powers(grow, lam, float(ptil[0]), float(hbh[0]))
    return InnerSolution(
        location=np.asarray(q, dtype=float),
        powers=powers,
        inner_value=float(vals[0]),
        p_total_tilde=float(ptil[0]),
    )


def _cluster_indices(nodes, values, candidates, radius):
    """Greedy clustering of tied nodes; keeps the best node per cluster."""
    order = sorted(
        candidates, key=lambda i: (-values[i], nodes[i, 0], nodes[i, 1])
    )
    reps = []
    for i in order:
        p = nodes[i]
        if all(np.linalg.norm(p - nodes[j]) >= radius for j in reps):
            reps.append(i)
    reps.sort(key=lambda i: (nodes[i, 0], nodes[i, 1]))
    return reps


def rate_location_search(
    lam,
    scn: Scenario,
    cfg: SolveConfig = DEFAULT_CONFIG,
    grid: Optional[PlanningGrid] = None,
    tie_tol: Optional[float] = None,
):
    """All grid maximizers of the priced-rate subproblem, clustered.

    Nodes whose value lies within ``tie_tol`` of the maximum are merged when
    closer than twice the grid step; each cluster keeps its best node.
    Returned solutions are sorted lexicographically by location.
    """
    lam = _validate_dual(lam, scn, cfg)
    grid = grid or PlanningGrid(scn, cfg.grid_step_m)
    tie = cfg.tie_tol if tie_tol is None else tie_tol
    vals, ptil, hbh = _rate_values(grid.gains, lam, scn.channel.sigma2)
    vmax = float(vals.max())
    cand = np.flatnonzero(vals >= vmax - tie)
    reps = _cluster_indices(grid.nodes, vals, cand, 2.0 * grid.step)
    out = []
    for i in reps:
        out.append(
            InnerSolution(
                location=grid.nodes[i].copy(),
                powers=_rate_powers(grid.gains[i], lam, float(ptil[i]), float(hbh[i])),
                inner_value=float(vals[i]),
                p_total_tilde=float(ptil[i]),
            )
        )
    return out


def _rate_dual_value(grid, lam, scn):
    vals, ptil, hbh = _rate_values(grid.gains, lam, scn.channel.sigma2)
    i = int(np.argmax(vals))
    return float(vals[i]) + float(lam @ scn.p_avg), i, ptil, hbh


def rate_dual_solve(
    scn: Scenario,
    cfg: SolveConfig = DEFAULT_CONFIG,
    grid: Optional[PlanningGrid] = None,
) -> DualSolveReport:
    """Minimize the rate dual over positive prices with the ellipsoid method.

    The subgradient at ``lam`` is ``p_avg - powers`` evaluated at the first
    (lexicographic) maximizing grid node.  When ``cfg.dual_polish`` is set,
    the converged point is re-priced through the time-sharing LP until the
    LP's budget prices reproduce themselves, which sharpens the value ties
    across the optimal hover locations.
    """
    grid = grid or PlanningGrid(scn, cfg.grid_step_m)
    sigma2 = scn.channel.sigma2

    def oracle(lam):
        g, i, ptil, hbh = _rate_dual_value(grid, lam, scn)
        powers = _rate_powers(grid.gains[i], lam, float(ptil[i]), float(hbh[i]))
        return g, scn.p_avg - powers

    lam0 = 1.0 / (LN2 * scn.p_avg)
    r0 = 10.0 * float(lam0.max())
    floor = np.full(scn.n_sensors, cfg.dual_lower_bound)
    res = ellipsoid_optimize(oracle, lam0, r0, floor, cfg, tol=cfg.dual_tol)

    lam, gval = res.x, res.value
    rounds = 0
    if cfg.dual_polish:
        lam, gval, rounds = _polish(
            lam, gval, scn, cfg, grid, mode="rate"
        )
    return DualSolveReport(
        dual_point=lam,
        dual_value=gval,
        iterations=res.iterations,
        subgradient_norm_history=res.subgrad_norms,
        converged=res.converged,
        certified_gap=res.certified_gap,
        polish_rounds=rounds,
    )


def _timeshare_lp(candidates, scn, maximize_rate: bool):
    """Build and solve the hovering-duration LP; returns (solution, rates)."""
    t_total = scn.horizon
    k = scn.n_sensors
    n = len(candidates)
    rates = []
    p = np.zeros((k, n))
    for j, c in enumerate(candidates):
        g = gains_at(c.location[None, :], scn)[0]
        amp = float(np.sqrt(c.powers * g).sum())
        rates.append(math.log1p(amp * amp / scn.channel.sigma2) / LN2)
        p[:, j] = c.powers
    obj = np.array(rates) if maximize_rate else np.ones(n)
    rows = np.vstack([p, np.ones((1, n))])
    rhs = np.append(t_total * scn.p_avg, t_total)
    sol = solve_lp(LinearProgram(c=obj, rows_a=rows, rows_b=rhs))
    return sol, np.array(rates)


def rate_timeshare(
    candidates: Sequence[InnerSolution],
    scn: Scenario,
    cfg: SolveConfig = DEFAULT_CONFIG,
) -> HoverPlan:
    """Optimal hovering durations across the candidate locations.

    Maximizes the time-averaged rate under the per-sensor average-power
    budgets.  If budget limits keep the durations from covering the horizon,
    the remainder is spent hovering with zero power at the first candidate
    (zero rate, zero cost), so the plan always accounts for the full mission.
    """
    if not candidates:
        raise ConfigError("rate_timeshare needs at least one candidate")
    if scn.horizon <= 0:
        raise ConfigError("time sharing requires a positive horizon")
    sol, rates = _timeshare_lp(candidates, scn, maximize_rate=True)
    taus = np.where(sol.x < 1e-9 * scn.horizon, 0.0, sol.x)
    points = [
        HoverPoint(c.location, float(tau), c.powers.copy())
        for c, tau in zip(candidates, taus)
    ]
    leftover = scn.horizon - float(taus.sum())
    if leftover > 0.0:
        # Budgets can keep the durations from covering the horizon; idle the
        # remainder with zero power (zero rate, zero cost).
        points.append(
            HoverPoint(
                candidates[0].location, leftover, np.zeros(scn.n_sensors)
            )
        )
    return HoverPlan(
        points=tuple(points),
        outage_duration=0.0,
        objective=float(taus @ rates) / scn.horizon,
        mode="rate",
    )


def solve_relaxed_rate(scn: Scenario, cfg: SolveConfig = DEFAULT_CONFIG):
    """Optimal relaxed rate plan: dual solve, location search, time sharing.

    Returns ``(HoverPlan, DualSolveReport)``; by strong duality the plan
    objective and the dual value agree up to grid discretization.
    """
    grid = PlanningGrid(scn, cfg.grid_step_m)
    report = rate_dual_solve(scn, cfg, grid)
    cands = rate_location_search(report.dual_point, scn, cfg, grid)
    plan = rate_timeshare(cands, scn, cfg)
    return plan, report


# ---------------------------------------------------------------------------
# Outage mode: on-off power allocation.


def _outage_values(gains: np.ndarray, mu: np.ndarray, gamma: float, sigma2: float):
    """Serving cost (priced power) of meeting the SNR threshold at each node."""
    s = gains @ (1.0 / mu)
    return gamma * sigma2 / s, s


def outage_inner_power(mu, q, scn: Scenario, cfg: SolveConfig = DEFAULT_CONFIG):
    """Cheapest powers meeting the SNR threshold at one location.

    The amplitude split across sensors weights each by its channel gain over
    its price; the combined SNR equals the threshold exactly (snapped upward
    by a hair so recomputation never undershoots it).
    """
    mu = _validate_dual(mu, scn, cfg)
    gamma = scn.require_gamma()
    grow = gains_at(np.asarray(q, dtype=float)[None, :], scn)[0]
    powers = _outage_powers(grow, mu, gamma, scn.channel.sigma2)
    return InnerSolution(
        location=np.asarray(q, dtype=float),
        powers=powers,
        inner_value=float(mu @ powers),
    )


def _outage_powers(gain_row, mu, gamma, sigma2):
    s = float(gain_row @ (1.0 / mu))
    rho = np.sqrt(gamma * gain_row) * math.sqrt(sigma2) / (s * mu)
    powers = rho * rho
    amp = float(np.sqrt(powers * gain_row).sum())
    achieved = amp * amp / sigma2
    if achieved < gamma * (1.0 + _SNAP):
        powers = powers * (gamma * (1.0 + _SNAP) / achieved)
    return powers


def outage_location_search(
    mu,
    scn: Scenario,
    cfg: SolveConfig = DEFAULT_CONFIG,
    grid: Optional[PlanningGrid] = None,
):
    """Clustered minimizers of the serving cost plus the branch comparison.

    Returns ``(solutions, flag)`` where the flag reports whether serving is
    cheaper than idling (cost < 1), ties with it, or loses to it.
    """
    mu = _validate_dual(mu, scn, cfg)
    gamma = scn.require_gamma()
    grid = grid or PlanningGrid(scn, cfg.grid_step_m)
    vals, _ = _outage_values(grid.gains, mu, gamma, scn.channel.sigma2)
    vmin = float(vals.min())
    cand = np.flatnonzero(vals <= vmin + cfg.tie_tol)
    reps = _cluster_indices(grid.nodes, -vals, cand, 2.0 * grid.step)
    sols = [
        InnerSolution(
            location=grid.nodes[i].copy(),
            powers=_outage_powers(grid.gains[i], mu, gamma, scn.channel.sigma2),
            inner_value=float(vals[i]),
        )
        for i in reps
    ]
    if abs(vmin - 1.0) <= cfg.tie_tol:
        flag = CaseFlag.TIE
    elif vmin < 1.0:
        flag = CaseFlag.NON_OUTAGE_CHEAPER
    else:
        flag = CaseFlag.OUTAGE_CHEAPER
    return sols, flag


def outage_dual_solve(
    scn: Scenario,
    cfg: SolveConfig = DEFAULT_CONFIG,
    grid: Optional[PlanningGrid] = None,
) -> DualSolveReport:
    """Maximize the outage dual over positive prices (ellipsoid on its negative).

    Where idling wins (serving cost above one) the subgradient uses zero
    powers; otherwise it uses the cheapest serving powers at the first
    minimizing node.
    """
    gamma = scn.require_gamma()
    grid = grid or PlanningGrid(scn, cfg.grid_step_m)
    sigma2 = scn.channel.sigma2

    def oracle(mu):
        vals, _ = _outage_values(grid.gains, mu, gamma, sigma2)
        i = int(np.argmin(vals))
        vmin = float(vals[i])
        if vmin <= 1.0:
            powers = _outage_powers(grid.gains[i], mu, gamma, sigma2)
            gtil = vmin - float(mu @ scn.p_avg)
        else:
            powers = np.zeros(scn.n_sensors)
            gtil = 1.0 - float(mu @ scn.p_avg)
        return -gtil, scn.p_avg - powers

    mu0 = 1.0 / (LN2 * scn.p_avg)
    r0 = 10.0 * float(mu0.max())
    floor = np.full(scn.n_sensors, cfg.dual_lower_bound)
    res = ellipsoid_optimize(oracle, mu0, r0, floor, cfg, tol=cfg.dual_tol)

    mu, gval = res.x, -res.value
    rounds = 0
    if cfg.dual_polish:
        mu, gval, rounds = _polish(mu, gval, scn, cfg, grid, mode="outage")
    return DualSolveReport(
        dual_point=mu,
        dual_value=gval,
        iterations=res.iterations,
        subgradient_norm_history=res.subgrad_norms,
        converged=res.converged,
        certified_gap=res.certified_gap,
        polish_rounds=rounds,
    )


def outage_timeshare(
    candidates: Sequence[InnerSolution],
    scn: Scenario,
    cfg: SolveConfig = DEFAULT_CONFIG,
) -> HoverPlan:
    """Longest budget-feasible serving time across the candidate locations.

    The unserved remainder of the horizon is the outage duration; sensors
    are silent during it (on-off allocation).
    """
    if not candidates:
        raise ConfigError("outage_timeshare needs at least one candidate")
    if scn.horizon <= 0:
        raise ConfigError("time sharing requires a positive horizon")
    sol, _ = _timeshare_lp(candidates, scn, maximize_rate=False)
    taus = np.where(sol.x < 1e-9 * scn.horizon, 0.0, sol.x)
    outage_dur = max(0.0, scn.horizon - float(taus.sum()))
    points = tuple(
        HoverPoint(c.location, float(tau), c.powers.copy())
        for c, tau in zip(candidates, taus)
    )
    return HoverPlan(
        points=points,
        outage_duration=outage_dur,
        objective=outage_dur / scn.horizon,
        mode="outage",
    )


def outage_scale_bisection(
    scn: Scenario,
    cfg: SolveConfig = DEFAULT_CONFIG,
    grid: Optional[PlanningGrid] = None,
) -> HoverPlan:
    """Recover hover locations when full budgets make every instant servable.

    Budgets are scaled down by kappa until the outage probability turns
    barely positive; the hover locations of that threshold solve are then
    used for the whole horizon with their (budget-feasible) serving powers,
    giving a zero-outage plan under the original budgets.
    """
    grid = grid or PlanningGrid(scn, cfg.grid_step_m)
    kappa_min = 1e-6
    probes = {}

    def outage_at(kappa):
        scaled = scn.with_budgets(kappa * scn.p_avg)
        rep = outage_dual_solve(scaled, cfg, grid)
        cands, flag = outage_location_search(rep.dual_point, scaled, cfg, grid)
        if flag is CaseFlag.NON_OUTAGE_CHEAPER:
            probes[kappa] = (0.0, cands)
            return 0.0
        if flag is CaseFlag.OUTAGE_CHEAPER:
            probes[kappa] = (1.0, cands)
            return 1.0
        plan = outage_timeshare(cands, scaled, cfg)
        probes[kappa] = (plan.objective, cands)
        return plan.objective

    if outage_at(kappa_min) <= 0.0:
        kappa_star = kappa_min  # degenerate: even vanishing budgets suffice
    else:
        lo, hi = kappa_min, 1.0
        while hi - lo > cfg.kappa_bisect_tol:
            mid = 0.5 * (lo + hi)
            if outage_at(mid) > 0.0:
                lo = mid
            else:
                hi = mid
        kappa_star = lo

    out, cands = probes[kappa_star]
    if not cands:
        raise NoSignChange("scale bisection found no serving candidates")
    # Spread the full horizon across the threshold locations in proportion to
    # their threshold-solve durations, then verify the original budgets.
    scaled = scn.with_budgets(kappa_star * scn.p_avg)
    ref = outage_timeshare(cands, scaled, cfg)
    durs = np.array([p.duration for p in ref.points])
    if durs.sum() <= 0:
        durs = np.ones(len(ref.points))
    durs = durs * (scn.horizon / durs.sum())
    avg = sum(
        d * p.powers for d, p in zip(durs, ref.points)
    ) / scn.horizon
    if np.any(avg > scn.p_avg + POWER_SLACK_W):
        plan = outage_timeshare(cands, scn, cfg)  # re-share under full budgets
        if plan.outage_duration <= cfg.kappa_tol * scn.horizon:
            plan = HoverPlan(plan.points, plan.outage_duration, 0.0, "outage")
        return plan
    points = tuple(
        HoverPoint(p.location, float(d), p.powers.copy())
        for p, d in zip(ref.points, durs)
    )
    return HoverPlan(points=points, outage_duration=0.0, objective=0.0, mode="outage")


def solve_relaxed_outage(scn: Scenario, cfg: SolveConfig = DEFAULT_CONFIG):
    """Optimal relaxed outage plan, dispatching on the dual case split."""
    grid = PlanningGrid(scn, cfg.grid_step_m)
    report = outage_dual_solve(scn, cfg, grid)
    cands, flag = outage_location_search(report.dual_point, scn, cfg, grid)
    if flag is CaseFlag.OUTAGE_CHEAPER:
        plan = HoverPlan(
            points=(),
            outage_duration=scn.horizon,
            objective=1.0,
            mode="outage",
        )
    elif flag is CaseFlag.NON_OUTAGE_CHEAPER:
        plan = outage_scale_bisection(scn, cfg, grid)
    else:
        plan = outage_timeshare(cands, scn, cfg)
    return plan, report


# ---------------------------------------------------------------------------
# Dual polish: column generation against the time-sharing master LP.


def _polish(point, value, scn, cfg, grid, mode):
    """Sharpen a converged dual point by generating hover columns.

    The time-sharing LP over a working set of (location, powers) columns is
    solved repeatedly; its budget prices are the next dual point, at which a
    fresh best column is generated.  When no column can improve the master,
    the prices are dual-optimal for the grid-restricted problem, so the
    inner values tie across the support to machine precision.  The result is
    only accepted if it does not worsen the dual bound.
    """
    gamma = scn.gamma_min
    sigma2 = scn.channel.sigma2
    floor = cfg.dual_lower_bound
    is_rate = mode == "rate"

    def dual_value(v):
        if is_rate:
            g, _, _, _ = _rate_dual_value(grid, v, scn)
            return g
        vals, _ = _outage_values(grid.gains, v, gamma, sigma2)
        return min(1.0, float(vals.min())) - float(v @ scn.p_avg)

    def generate(v):
        """Best column at prices v: (solution, its priced value)."""
        if is_rate:
            vals, ptil, hbh = _rate_values(grid.gains, v, sigma2)
            i = int(np.argmax(vals))
            sol = InnerSolution(
                location=grid.nodes[i].copy(),
                powers=_rate_powers(grid.gains[i], v, float(ptil[i]), float(hbh[i])),
                inner_value=float(vals[i]),
            )
            return sol, float(vals[i])
        vals, _ = _outage_values(grid.gains, v, gamma, sigma2)
        i = int(np.argmin(vals))
        sol = InnerSolution(
            location=grid.nodes[i].copy(),
            powers=_outage_powers(grid.gains[i], v, gamma, sigma2),
            inner_value=float(vals[i]),
        )
        return sol, float(vals[i])

    def col_key(sol):
        return (
            round(float(sol.location[0]), 9),
            round(float(sol.location[1]), 9),
            tuple(np.round(sol.powers, 12)),
        )

    best = np.asarray(point, dtype=float)
    best_val = value
    columns = []
    seen = set()
    for sol in _loose_candidates(best, scn, cfg, grid, mode):
        key = col_key(sol)
        if key not in seen:
            seen.add(key)
            columns.append(sol)
    current = best
    rounds = 0
    for _ in range(60):
        lp_sol, _ = _timeshare_lp(columns, scn, maximize_rate=is_rate)
        prices = np.maximum(lp_sol.duals[: scn.n_sensors], floor)
        y0 = float(lp_sol.duals[scn.n_sensors])
        col, priced = generate(prices)
        rounds += 1
        current = prices
        if is_rate:
            # Inner value already nets out priced power; the column improves
            # the master iff it beats the duration price.
            improving = priced > y0 + 1e-11 * max(1.0, abs(y0))
        else:
            improving = float(prices @ col.powers) < (1.0 - y0) * (1.0 - 1e-11)
        if not improving:
            break
        key = col_key(col)
        if key in seen:
            break  # degenerate regeneration; master cannot grow
        seen.add(key)
        columns.append(col)

    val = dual_value(current)
    better = val <= best_val + 1e-12 if is_rate else val >= best_val - 1e-12
    if better:
        return current, val, rounds
    return best, best_val, 0


def _loose_candidates(point, scn, cfg, grid, mode):
    """Clustered near-optimal locations with a widened tie band."""
    loose = max(cfg.tie_tol, 1e-4)
    if mode == "rate":
        return rate_location_search(point, scn, cfg, grid, tie_tol=loose)
    gamma = scn.require_gamma()
    vals, _ = _outage_values(grid.gains, point, gamma, scn.channel.sigma2)
    vmin = float(vals.min())
    cand = np.flatnonzero(vals <= vmin + loose)
    reps = _cluster_indices(grid.nodes, -vals, cand, 2.0 * grid.step)
    return [
        InnerSolution(
            location=grid.nodes[i].copy(),
            powers=_outage_powers(grid.gains[i], point, gamma, scn.channel.sigma2),
            inner_value=float(vals[i]),
        )
        for i in reps
    ]


# ---------------------------------------------------------------------------
# Plan verification and serialization.


def hover_objective(plan: HoverPlan, scn: Scenario) -> float:
    """Recompute a hover plan's objective from its points."""
    if scn.horizon <= 0:
        raise ConfigError("objective undefined for zero horizon")
    if plan.mode == "outage":
        return plan.outage_duration / scn.horizon
    total = 0.0
    for p in plan.points:
        g = gains_at(p.location[None, :], scn)[0]
        amp = float(np.sqrt(p.powers * g).sum())
        total += p.duration * math.log1p(amp * amp / scn.channel.sigma2) / LN2
    return total / scn.horizon


def check_hover_plan(
    plan: HoverPlan, scn: Scenario, cfg: SolveConfig = DEFAULT_CONFIG
) -> list:
    """Machine-check a hover plan's invariants; returns violation strings."""
    bad = []
    if plan.outage_duration < -1e-12:
        bad.append("negative outage duration")
    if any(p.duration < -1e-12 for p in plan.points):
        bad.append("negative hover duration")
    if abs(plan.total_time() - scn.horizon) > 1e-6:
        bad.append(
            f"durations sum to {plan.total_time():.9g}, expected {scn.horizon}"
        )
    if plan.points:
        avg = sum(p.duration * p.powers for p in plan.points) / scn.horizon
        over = avg - scn.p_avg
        if np.any(over > POWER_SLACK_W):
            k = int(np.argmax(over))
            bad.append(f"sensor {k} average power exceeds budget by {over[k]:.3g} W")
    if plan.mode == "outage" and scn.gamma_min is not None:
        for p in plan.active_points():
            g = gains_at(p.location[None, :], scn)[0]
            amp = float(np.sqrt(p.powers * g).sum())
            s = amp * amp / scn.channel.sigma2
            if s < scn.gamma_min * (1.0 - 1e-9) - cfg.tol_feas:
                bad.append(f"hover point {tuple(p.location)} below SNR threshold")
    return bad


def write_hover_csv(plan: HoverPlan, fh) -> None:
    """Hover plan as CSV: x_m, y_m, duration_s, per-sensor watts.

    Zero-duration and zero-power (idle) candidates are omitted; the trailing
    row carries the remaining idle/outage duration so the rows always account
    for the whole mission.
    """
    close = False
    if isinstance(fh, (str, bytes)) or hasattr(fh, "__fspath__"):
        fh = open(fh, "w", encoding="utf-8", newline="")
        close = True
    try:
        k = len(plan.points[0].powers) if plan.points else 0
        cols = ["x_m", "y_m", "duration_s"] + [f"p{i + 1}_w" for i in range(k)]
        fh.write(",".join(cols) + "\n")
        serving = plan.serving_points()
        for p in serving:
            row = [repr(float(p.location[0])), repr(float(p.location[1])),
                   repr(float(p.duration))]
            row += [repr(float(v)) for v in p.powers]
            fh.write(",".join(row) + "\n")
        idle = plan.total_time() - sum(p.duration for p in serving)
        fh.write(",".join(["", "", repr(float(idle))] + [""] * k) + "\n")
    finally:
        if close:
            fh.close()


def read_hover_csv(path, mode: str) -> HoverPlan:
    """Re-ingest a hover plan CSV written by :func:`write_hover_csv`."""
    with open(path, "r", encoding="utf-8") as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    header = lines[0].split(",")
    k = len(header) - 3
    points = []
    outage = 0.0
    for ln in lines[1:]:
        cells = ln.split(",")
        if cells[0] == "":
            outage = float(cells[2])
            continue
        points.append(
            HoverPoint(
                location=np.array([float(cells[0]), float(cells[1])]),
                duration=float(cells[2]),
                powers=np.array([float(v) for v in cells[3 : 3 + k]]),
            )
        )
    total = outage + sum(p.duration for p in points)
    objective = outage / total if mode == "outage" and total > 0 else 0.0
    return HoverPlan(tuple(points), outage, objective, mode)


def write_report_json(report: DualSolveReport, plan: HoverPlan, fh) -> None:
    """Dual variables, objective, and iteration summary as JSON."""
    close = False
    if isinstance(fh, (str, bytes)) or hasattr(fh, "__fspath__"):
        fh = open(fh, "w", encoding="utf-8")
        close = True
    try:
        json.dump(
            {
                "mode": plan.mode,
                "objective": plan.objective,
                "outage_duration_s": plan.outage_duration,
                "dual_variables": [float(v) for v in report.dual_point],
                "dual_value": report.dual_value,
                "iterations": report.iterations,
                "converged": report.converged,
                "certified_gap": report.certified_gap,
                "hover_points": [
                    {
                        "x_m": float(p.location[0]),
                        "y_m": float(p.location[1]),
                        "duration_s": float(p.duration),
                        "powers_w": [float(v) for v in p.powers],
                    }
                    for p in plan.points
                ],
            },
            fh,
            indent=2,
        )
        fh.write("\n")
    finally:
        if close:
            fh.close()
