"""Joint UAV-trajectory and sensor-power planning for coherent data collection.

Two planning modes share one physical model: ``rate`` maximizes the
time-averaged throughput of sensors beamforming a shared message to the
vehicle, ``outage`` minimizes the fraction of the mission spent below an SNR
threshold.  Each mode has a speed-unconstrained relaxed solver (exact, via
Lagrange duality) and a finite-horizon alternating solver.
"""

from .config import DEFAULT_CONFIG, SolveConfig
from .errors import (
    BeamplanError,
    BudgetExceeded,
    ConfigError,
    Infeasible,
    InfeasibleHorizon,
    IterationLimit,
    MissingThreshold,
    NonPositiveParameter,
    NoSignChange,
    NoStrictlyFeasibleStart,
    SolverError,
    Unbounded,
)
from .model import (
    ChannelParams,
    DiscretePlan,
    Rect,
    Scenario,
    SensorSpec,
    TrajectoryMetrics,
    channel_amplitude,
    check_plan,
    db_to_linear,
    dbm_to_watts,
    distance,
    evaluate_plan,
    linear_to_db,
    load_scenario,
    outage_indicator,
    rate,
    snr,
    validate_scenario,
    watts_to_dbm,
)
from .oracle import brute_force_oracle
from .relaxed import (
    CaseFlag,
    DualSolveReport,
    HoverPlan,
    HoverPoint,
    InnerSolution,
    check_hover_plan,
    solve_relaxed_outage,
    solve_relaxed_rate,
)
from .sca import (
    OutagePostResult,
    ScaResult,
    outage_postprocess,
    sca_solve,
)

__version__ = "0.1.0"
