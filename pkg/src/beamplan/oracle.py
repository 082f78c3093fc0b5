"""Exhaustive enumeration oracle for tiny scenarios.

Bounds the relaxed solvers in tests: every enumerated combination is a
feasible plan, so the best one can never beat the true optimum by more than
discretization slack.
"""

from __future__ import annotations

import itertools
import math

import numpy as np

from .errors import BudgetExceeded, ConfigError
from .model import LN2, Scenario, gains_at


def brute_force_oracle(
    scn: Scenario,
    mode: str,
    *,
    hover_step: float = 10.0,
    n_levels: int = 6,
    level_scale: float = 4.0,
    n_fracs: int = 10,
    max_combos: int = 1_000_000,
) -> float:
    """Best objective over hover-point pairs, power levels, and time shares.

    Powers per sensor range over ``n_levels`` values up to ``level_scale``
    times the budget (time sharing lets instantaneous power exceed the
    average).  Only scenarios with one or two sensors are supported.
    """
    k = scn.n_sensors
    if k > 2:
        raise ConfigError("the enumeration oracle supports at most two sensors")
    nodes = scn.region.grid_nodes(hover_step)
    n_profiles = n_levels**k
    combos = len(nodes) * n_profiles * n_profiles * (n_fracs + 1)
    if combos > max_combos:
        raise BudgetExceeded(f"{combos} combinations exceed cap {max_combos}")

    levels = [
        np.linspace(0.0, level_scale * scn.p_avg[i], n_levels) for i in range(k)
    ]
    profiles = np.array(list(itertools.product(*levels)))  # (P, K)
    gains = gains_at(nodes, scn)                            # (M, K)
    amps = np.sqrt(profiles[None, :, :] * gains[:, None, :]).sum(axis=2)
    snrs = amps * amps / scn.channel.sigma2                 # (M, P)

    fracs = np.linspace(0.0, 1.0, n_fracs + 1)
    if mode == "rate":
        best_rate = np.log1p(snrs).max(axis=0) / LN2        # (P,)
        best = 0.0
        for f in fracs:
            need = f * profiles[:, None, :] + (1 - f) * profiles[None, :, :]
            ok = np.all(need <= scn.p_avg[None, None, :] + 1e-12, axis=2)
            val = f * best_rate[:, None] + (1 - f) * best_rate[None, :]
            val = np.where(ok, val, -np.inf)
            best = max(best, float(val.max()))
        return best

    gamma = scn.require_gamma()
    servable = (snrs >= gamma).any(axis=0)                  # (P,)
    if not servable.any():
        return 1.0
    pw = profiles[servable]
    best_served = 0.0
    for f1 in fracs:
        for f2 in fracs:
            if f1 + f2 > 1.0 + 1e-12 or f1 + f2 <= best_served:
                continue
            need = f1 * pw[:, None, :] + f2 * pw[None, :, :]
            if np.any(np.all(need <= scn.p_avg[None, None, :] + 1e-12, axis=2)):
                best_served = f1 + f2
    return 1.0 - best_served
