"""Solver configuration shared by every planner."""

from __future__ import annotations

from dataclasses import dataclass, fields, replace


@dataclass(frozen=True)
class SolveConfig:
    """Tolerances, resolutions, and iteration caps governing every solver.

    All tolerances are strictly positive.  ``max_iters`` bounds a single
    iterative solve (ellipsoid cuts, simplex pivots, Newton steps); set to 0
    to let each solver pick its own dimension-dependent cap.
    """

    tol_obj: float = 1e-6          # relative objective tolerance
    tol_feas: float = 1e-8         # constraint violation tolerance
    max_iters: int = 0             # 0 -> per-solver default
    grid_step_m: float = 1.0       # 2D exhaustive-search resolution
    dual_lower_bound: float = 1e-8  # floor keeping dual variables positive
    sca_tol: float = 1e-4          # relative improvement stopping an SCA loop
    sca_max_rounds: int = 50

    # Dual / time-sharing machinery.
    dual_tol: float = 1e-10        # certified-gap target for dual ellipsoid runs
    dual_polish: bool = True       # re-price dual point through the hover LP
    tie_tol: float = 1e-6          # absolute tie band in the location search
    duality_gap_tol: float = 1e-2  # accepted |primal - dual| after recovery
    kappa_tol: float = 1e-3        # "slightly above zero" outage probability
    kappa_bisect_tol: float = 1e-4  # bisection tolerance on the budget scale

    # Finite-horizon machinery.
    n_slots: int = 128
    newton_tol: float = 1e-10      # Newton decrement^2 / 2 threshold
    barrier_mu: float = 20.0       # barrier parameter growth factor

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if f.type == "float" and v <= 0:
                raise ValueError(f"{f.name} must be positive, got {v!r}")
        if self.max_iters < 0:
            raise ValueError("max_iters must be >= 0")
        if self.sca_max_rounds < 1 or self.n_slots < 1:
            raise ValueError("iteration counts must be >= 1")

    def updated(self, **kwargs) -> "SolveConfig":
        return replace(self, **kwargs)


DEFAULT_CONFIG = SolveConfig()
