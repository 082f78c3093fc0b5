"""Self-contained convex solvers used by both planners."""

from ..config import DEFAULT_CONFIG, SolveConfig
from .barrier import (
    BarrierResult,
    BudgetRows,
    CallbackRows,
    LinearRows,
    SmoothProgram,
    feasible_start,
    maximize_smooth,
)
from .bisection import bisect
from .ellipsoid import EllipsoidResult, EllipsoidState, ellipsoid_optimize
from .lp import LinearProgram, LpSolution, solve_lp

__all__ = [
    "BarrierResult",
    "BudgetRows",
    "CallbackRows",
    "DEFAULT_CONFIG",
    "EllipsoidResult",
    "EllipsoidState",
    "LinearProgram",
    "LinearRows",
    "LpSolution",
    "SmoothProgram",
    "SolveConfig",
    "bisect",
    "ellipsoid_optimize",
    "feasible_start",
    "maximize_smooth",
    "solve_lp",
]
