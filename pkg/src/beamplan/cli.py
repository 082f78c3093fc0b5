"""Command-line surface and experiment harness.

Two subcommands: ``plan`` runs one solver on one scenario and writes the
plan, metrics, and a manifest; ``sweep`` repeats a solver set across a
parameter list and writes a long-format CSV for plotting.  Outputs are
byte-identical across runs with identical inputs.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import dataclasses
import hashlib
import json
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .config import DEFAULT_CONFIG, SolveConfig
from .errors import BeamplanError, ConfigError, SolverError
from .model import (
    DiscretePlan,
    Scenario,
    dbm_to_watts,
    evaluate_plan,
    load_scenario,
)
from .relaxed import (
    HoverPlan,
    solve_relaxed_outage,
    solve_relaxed_rate,
    write_hover_csv,
    write_report_json,
)
from .sca import (
    init_direct,
    init_fly_hover_fly,
    init_successive_hover_fly,
    optimize_powers,
    optimize_trajectory_only,
    outage_postprocess,
    sca_solve,
    true_objective,
    write_plan_csv,
    write_trace_csv,
)

SOLVERS = ("relaxed", "sca", "init-fhf", "init-shf", "init-direct", "traj-only")
MODES = ("rate", "outage")
_WORKERS_ENV = "BEAMPLAN_WORKERS"


@dataclass(frozen=True)
class RunRequest:
    mode: str
    solver: str
    scenario_path: str
    out_dir: str
    overrides: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.solver not in SOLVERS:
            raise ConfigError(f"solver must be one of {SOLVERS}, got {self.solver!r}")


@dataclass(frozen=True)
class SweepSpec:
    param: str  # "horizon" | "pavg"
    values: tuple
    scenario_path: str
    mode: str
    solvers: tuple
    out_dir: str
    overrides: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.param not in ("horizon", "pavg"):
            raise ConfigError("sweep parameter must be 'horizon' or 'pavg'")
        if not self.values:
            raise ConfigError("sweep needs a nonempty value list")
        for s in self.solvers:
            if s not in SOLVERS:
                raise ConfigError(f"unknown solver {s!r}")


def _config_from_overrides(overrides: dict) -> SolveConfig:
    return DEFAULT_CONFIG.updated(**overrides) if overrides else DEFAULT_CONFIG


def _with_param(scn: Scenario, param: str, value: float) -> Scenario:
    if param == "horizon":
        return dataclasses.replace(scn, horizon=float(value))
    return scn.with_budgets(np.full(scn.n_sensors, dbm_to_watts(value)))


def _relaxed(scn, mode, cfg):
    if mode == "rate":
        return solve_relaxed_rate(scn, cfg)
    return solve_relaxed_outage(scn, cfg)


def _solve_finite(scn, mode, solver, cfg):
    """Run one finite-horizon solver variant; returns (plan, objective, extras)."""
    relaxed_plan, report = _relaxed(scn, mode, cfg)
    extras = {"relaxed_bound": relaxed_plan.objective, "dual_value": report.dual_value}
    if solver == "sca":
        res = sca_solve(scn, mode, cfg, relaxed_plan=relaxed_plan)
        plan, trace = res.plan, res.trace
        extras["init_kind"] = res.init_kind
        extras["sca_converged"] = res.converged
    else:
        if solver == "init-shf":
            init = init_successive_hover_fly(scn, relaxed_plan, cfg)
        elif solver == "init-fhf":
            init = init_fly_hover_fly(scn, cfg)
        elif solver == "init-direct":
            init = init_direct(scn, cfg)
        else:  # traj-only: uniform powers, trajectory optimization only
            init = init_direct(scn, cfg)
        plan = DiscretePlan(
            n_slots=cfg.n_slots,
            slot_len=scn.horizon / cfg.n_slots,
            waypoints=init.waypoints,
            powers=np.tile(scn.p_avg, (cfg.n_slots, 1)),
        )
        trace = ()
        if solver == "traj-only":
            plan = optimize_trajectory_only(plan, mode, scn, cfg)
        else:
            plan = optimize_powers(plan, mode, scn, cfg)

    if mode == "outage" and solver != "traj-only":
        post = outage_postprocess(plan, scn, cfg)
        if (
            solver == "sca"
            and res.init_objective is not None
            and res.init_objective < post.outage_prob
        ):
            # Keep the better of the converged plan and its initialization:
            # the alternating loop improves the surrogate, not the served count.
            plan = res.init_plan
            post = outage_postprocess(plan, scn, cfg)
        plan = plan.with_powers(post.powers)
        extras["n_served"] = post.n_served
        objective = post.outage_prob
    else:
        metrics = evaluate_plan(plan, scn)
        objective = metrics.avg_rate if mode == "rate" else metrics.outage_prob
    return plan, float(objective), trace, extras


def run(req: RunRequest) -> dict:
    """Execute one planning request and write its output files.

    Returns a summary dict (also written as metrics.json).  No files are
    written if the scenario fails validation.
    """
    cfg = _config_from_overrides(req.overrides)
    scn = load_scenario(req.scenario_path)
    out = Path(req.out_dir)

    digest = hashlib.sha256(Path(req.scenario_path).read_bytes()).hexdigest()
    manifest = {
        "mode": req.mode,
        "solver": req.solver,
        "scenario_path": str(req.scenario_path),
        "scenario_sha256": digest,
        "config": dataclasses.asdict(cfg),
    }

    if req.solver == "relaxed":
        plan, report = _relaxed(scn, req.mode, cfg)
        out.mkdir(parents=True, exist_ok=True)
        write_hover_csv(plan, out / "plan.csv")
        write_report_json(report, plan, out / "report.json")
        summary = {
            "mode": req.mode,
            "solver": req.solver,
            "objective": plan.objective,
            "dual_value": report.dual_value,
            "hover_points": len(plan.serving_points()),
            "outage_duration_s": plan.outage_duration,
        }
    else:
        plan, objective, trace, extras = _solve_finite(scn, req.mode, req.solver, cfg)
        out.mkdir(parents=True, exist_ok=True)
        write_plan_csv(plan, scn, out / "plan.csv")
        if trace:
            write_trace_csv(trace, out / "trace.csv")
        summary = {
            "mode": req.mode,
            "solver": req.solver,
            "objective": objective,
            **extras,
        }

    with open(out / "metrics.json", "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    with open(out / "manifest.json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return summary


def _sweep_cell(scn, mode, solver, cfg):
    if solver == "relaxed":
        plan, _ = _relaxed(scn, mode, cfg)
        return plan.objective
    _, objective, _, _ = _solve_finite(scn, mode, solver, cfg)
    return objective


def sweep(spec: SweepSpec) -> list:
    """Run every solver at every parameter value; long-format result rows.

    The relaxed bound is always included as a reference series.  Failures
    are recorded per cell and the sweep continues.
    """
    cfg = _config_from_overrides(spec.overrides)
    base = load_scenario(spec.scenario_path)
    solvers = list(spec.solvers)
    if "relaxed" not in solvers:
        solvers.insert(0, "relaxed")

    cells = [
        (value, solver)
        for value in spec.values
        for solver in solvers
    ]
    workers = int(os.environ.get(_WORKERS_ENV, "1") or "1")

    def work(cell):
        value, solver = cell
        try:
            scn = _with_param(base, spec.param, value)
            return (value, solver, _sweep_cell(scn, spec.mode, solver, cfg), "ok")
        except BeamplanError as exc:
            return (value, solver, None, f"error:{type(exc).__name__}")

    if workers > 1:
        with concurrent.futures.ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(work, cells))
    else:
        rows = [work(c) for c in cells]
    rows.sort(key=lambda r: (spec.values.index(r[0]), solvers.index(r[1])))

    out = Path(spec.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "sweep.csv", "w", encoding="utf-8", newline="") as fh:
        fh.write(f"{spec.param},solver,objective,status\n")
        for value, solver, obj, status in rows:
            cell = "" if obj is None else repr(float(obj))
            fh.write(f"{value!r},{solver},{cell},{status}\n")
    return rows


# ---------------------------------------------------------------------------
# Argument parsing.


def _add_common(p):
    p.add_argument("--scenario", required=True, help="scenario JSON file")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--grid-step", type=float, default=None, metavar="M")
    p.add_argument("--slots", type=int, default=None, metavar="N")
    p.add_argument("--tol", type=float, default=None, metavar="X")
    p.add_argument("--max-rounds", type=int, default=None, metavar="R")


def _overrides(args) -> dict:
    ov = {}
    if args.grid_step is not None:
        ov["grid_step_m"] = args.grid_step
    if args.slots is not None:
        ov["n_slots"] = args.slots
    if args.tol is not None:
        ov["sca_tol"] = args.tol
    if args.max_rounds is not None:
        ov["sca_max_rounds"] = args.max_rounds
    return ov


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="beamplan",
        description="UAV trajectory and sensor power planning "
        "for distributed-beamforming data collection",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    plan = sub.add_parser("plan", help="run one solver on one scenario")
    plan.add_argument("--mode", choices=MODES, required=True)
    plan.add_argument("--solver", choices=SOLVERS, required=True)
    _add_common(plan)

    sw = sub.add_parser("sweep", help="sweep a parameter across solvers")
    sw.add_argument("--mode", choices=MODES, required=True)
    sw.add_argument("--param", choices=("horizon", "pavg"), required=True)
    sw.add_argument(
        "--values", required=True,
        help="comma-separated parameter values (seconds or dBm)",
    )
    sw.add_argument(
        "--solvers", default="sca",
        help="comma-separated solver list (relaxed is always added)",
    )
    _add_common(sw)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "plan":
            req = RunRequest(
                mode=args.mode,
                solver=args.solver,
                scenario_path=args.scenario,
                out_dir=args.out,
                overrides=_overrides(args),
            )
            summary = run(req)
            print(json.dumps(summary, sort_keys=True))
        else:
            spec = SweepSpec(
                param=args.param,
                values=tuple(float(v) for v in args.values.split(",")),
                scenario_path=args.scenario,
                mode=args.mode,
                solvers=tuple(args.solvers.split(",")),
                out_dir=args.out,
                overrides=_overrides(args),
            )
            rows = sweep(spec)
            failed = sum(1 for r in rows if r[2] is None)
            print(f"sweep finished: {len(rows)} cells, {failed} failed")
        return 0
    except ConfigError as exc:
        _emit_error("ConfigError", exc)
        return 2
    except SolverError as exc:
        _emit_error(type(exc).__name__, exc)
        return 3
    except BeamplanError as exc:
        _emit_error(type(exc).__name__, exc)
        return 1


def _emit_error(category: str, exc: Exception) -> None:
    print(
        json.dumps({"error_category": category, "message": str(exc)}),
        file=sys.stderr,
    )


if __name__ == "__main__":
    sys.exit(main())
