"""Scenario description and physical-layer formulas.

All arithmetic inside the package is linear (watts, linear gains); decibel
quantities appear only at the configuration boundary.  Every type is
immutable after construction and every operation is a pure function, so
values can be shared freely across threads.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import (
    ConfigError,
    InfeasibleHorizon,
    MissingThreshold,
    NonPositiveParameter,
)

LN2 = math.log(2.0)

# Absolute slack (watts) accepted on average-power feasibility checks; LP and
# Newton solvers return points feasible to tolerance, not exactly.
POWER_SLACK_W = 1e-9

__all__ = [
    "LN2",
    "POWER_SLACK_W",
    "ChannelParams",
    "DiscretePlan",
    "Rect",
    "Scenario",
    "SensorSpec",
    "TrajectoryMetrics",
    "channel_amplitude",
    "channel_gains",
    "check_plan",
    "db_to_linear",
    "dbm_to_watts",
    "distance",
    "evaluate_plan",
    "gains_at",
    "linear_to_db",
    "load_scenario",
    "outage_indicator",
    "rate",
    "snr",
    "validate_scenario",
    "watts_to_dbm",
]


# ---------------------------------------------------------------------------
# Unit conversions (the only place decibels exist).


def dbm_to_watts(x_dbm: float) -> float:
    """Convert a dBm power to watts: 10^((x - 30) / 10)."""
    return 10.0 ** ((float(x_dbm) - 30.0) / 10.0)


def watts_to_dbm(p_watts: float) -> float:
    if p_watts <= 0:
        raise NonPositiveParameter(f"cannot express {p_watts} W in dBm")
    return 10.0 * math.log10(p_watts) + 30.0


def db_to_linear(x_db: float) -> float:
    """Convert a dB ratio to a linear ratio: 10^(x / 10)."""
    return 10.0 ** (float(x_db) / 10.0)


def linear_to_db(v: float) -> float:
    if v <= 0:
        raise NonPositiveParameter(f"cannot express {v} in dB")
    return 10.0 * math.log10(v)


# ---------------------------------------------------------------------------
# Domain types.


def _freeze(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(np.asarray(a, dtype=float))
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Rect:
    """Axis-aligned rectangle [x_lo, x_hi] x [y_lo, y_hi] in meters.

    Either side may be degenerate (lo == hi), e.g. when all sensors and both
    trajectory endpoints share a coordinate.
    """

    x_lo: float
    x_hi: float
    y_lo: float
    y_hi: float

    def __post_init__(self):
        if self.x_hi < self.x_lo or self.y_hi < self.y_lo:
            raise ConfigError(f"empty region {self}")

    def contains(self, p, tol: float = 1e-9) -> bool:
        x, y = float(p[0]), float(p[1])
        return (
            self.x_lo - tol <= x <= self.x_hi + tol
            and self.y_lo - tol <= y <= self.y_hi + tol
        )

    def grid_nodes(self, step: float) -> np.ndarray:
        """All grid nodes at the given spacing, in (x, y)-lexicographic order.

        Both ends of each axis are always included, so the returned set covers
        the rectangle's boundary even when the side length is not an exact
        multiple of ``step``.
        """
        xs = _axis_nodes(self.x_lo, self.x_hi, step)
        ys = _axis_nodes(self.y_lo, self.y_hi, step)
        return np.column_stack(
            [np.repeat(xs, ys.size), np.tile(ys, xs.size)]
        )


def _axis_nodes(lo: float, hi: float, step: float) -> np.ndarray:
    if step <= 0:
        raise NonPositiveParameter("grid step must be positive")
    if hi <= lo:
        return np.array([lo])
    n = int(math.floor((hi - lo) / step + 1e-9))
    pts = lo + step * np.arange(n + 1)
    if pts[-1] < hi - 1e-9 * max(1.0, abs(hi)):
        pts = np.append(pts, hi)
    else:
        pts[-1] = min(pts[-1], hi)
    return pts


@dataclass(frozen=True)
class ChannelParams:
    """Large-scale channel model: gain beta0 at 1 m, noise power, path-loss exponent.

    Signal phases are not represented: each sensor pre-compensates its carrier
    phase so the amplitudes add coherently at the receiver.
    """

    beta0: float
    sigma2: float
    alpha: float

    def __post_init__(self):
        if self.beta0 <= 0:
            raise NonPositiveParameter("beta0 must be positive")
        if self.sigma2 <= 0:
            raise NonPositiveParameter("sigma2 must be positive")
        if self.alpha < 2:
            raise ConfigError(f"path-loss exponent must be >= 2, got {self.alpha}")


@dataclass(frozen=True)
class SensorSpec:
    """A ground sensor: horizontal position and average transmit-power budget."""

    position: np.ndarray  # (2,) meters
    p_avg: float          # watts

    def __post_init__(self):
        object.__setattr__(self, "position", _freeze(self.position))
        if self.position.shape != (2,):
            raise ConfigError("sensor position must be a 2-vector")
        if self.p_avg <= 0:
            raise NonPositiveParameter("sensor power budget must be positive")


@dataclass(frozen=True)
class Scenario:
    """Immutable description of one data-collection mission.

    The flight region defaults to the bounding box of the sensors and both
    trajectory endpoints.  ``gamma_min`` (linear SNR threshold) is present
    only for outage planning.
    """

    sensors: tuple
    altitude: float
    v_max: float
    horizon: float
    q_init: np.ndarray
    q_final: np.ndarray
    channel: ChannelParams
    gamma_min: Optional[float] = None
    region: Optional[Rect] = None

    # Derived, filled in __post_init__.
    sensor_xy: np.ndarray = field(init=False, repr=False)
    p_avg: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        sensors = tuple(self.sensors)
        if not sensors:
            raise ConfigError("scenario needs at least one sensor")
        object.__setattr__(self, "sensors", sensors)
        object.__setattr__(self, "q_init", _freeze(self.q_init))
        object.__setattr__(self, "q_final", _freeze(self.q_final))
        if self.q_init.shape != (2,) or self.q_final.shape != (2,):
            raise ConfigError("trajectory endpoints must be 2-vectors")
        if self.altitude <= 0:
            raise NonPositiveParameter("altitude must be positive")
        if self.v_max <= 0:
            raise NonPositiveParameter("v_max must be positive")
        if self.horizon < 0:
            raise ConfigError("horizon must be nonnegative")
        if self.gamma_min is not None and self.gamma_min <= 0:
            raise NonPositiveParameter("gamma_min must be positive")

        min_time = float(np.linalg.norm(self.q_final - self.q_init)) / self.v_max
        if self.horizon < min_time * (1.0 - 1e-12) - 1e-12:
            raise InfeasibleHorizon(
                f"horizon {self.horizon} s < minimum flight time {min_time:.6g} s"
            )

        xy = _freeze(np.stack([s.position for s in sensors]))
        object.__setattr__(self, "sensor_xy", xy)
        object.__setattr__(
            self, "p_avg", _freeze(np.array([s.p_avg for s in sensors]))
        )

        region = self.region
        if region is None:
            pts = np.vstack([xy, self.q_init, self.q_final])
            region = Rect(
                float(pts[:, 0].min()), float(pts[:, 0].max()),
                float(pts[:, 1].min()), float(pts[:, 1].max()),
            )
            object.__setattr__(self, "region", region)
        else:
            for p in (*xy, self.q_init, self.q_final):
                if not region.contains(p):
                    raise ConfigError(
                        f"flight region {region} does not contain {tuple(p)}"
                    )

    @property
    def n_sensors(self) -> int:
        return len(self.sensors)

    def require_gamma(self) -> float:
        if self.gamma_min is None:
            raise MissingThreshold("scenario has no SNR threshold (gamma_min)")
        return self.gamma_min

    def with_budgets(self, p_avg: np.ndarray) -> "Scenario":
        """Copy of the scenario with per-sensor budgets replaced."""
        sensors = tuple(
            SensorSpec(s.position, float(p)) for s, p in zip(self.sensors, p_avg)
        )
        return Scenario(
            sensors, self.altitude, self.v_max, self.horizon,
            self.q_init, self.q_final, self.channel, self.gamma_min, self.region,
        )


@dataclass(frozen=True)
class DiscretePlan:
    """Finite-horizon plan: per-slot waypoints and per-slot per-sensor powers.

    Slot n covers ((n-1)*slot_len, n*slot_len]; waypoints[n-1] is where the
    vehicle sits at the end of slot n, with the initial location pinned just
    before slot 1.
    """

    n_slots: int
    slot_len: float
    waypoints: np.ndarray  # (N, 2)
    powers: np.ndarray     # (N, K)

    def __post_init__(self):
        object.__setattr__(self, "waypoints", _freeze(self.waypoints))
        object.__setattr__(self, "powers", _freeze(self.powers))
        if self.waypoints.shape != (self.n_slots, 2):
            raise ConfigError("waypoints must have shape (n_slots, 2)")
        if self.powers.shape[0] != self.n_slots:
            raise ConfigError("powers must have one row per slot")
        if not np.all(np.isfinite(self.waypoints)):
            raise ConfigError("waypoints must be finite")
        if not np.all(np.isfinite(self.powers)) or np.any(self.powers < -1e-15):
            raise ConfigError("powers must be finite and nonnegative")

    def with_powers(self, powers: np.ndarray) -> "DiscretePlan":
        return DiscretePlan(self.n_slots, self.slot_len, self.waypoints, powers)

    def with_waypoints(self, waypoints: np.ndarray) -> "DiscretePlan":
        return DiscretePlan(self.n_slots, self.slot_len, waypoints, self.powers)


@dataclass(frozen=True)
class TrajectoryMetrics:
    """Aggregate figures of a discrete plan."""

    avg_rate: float                     # bps/Hz
    outage_prob: Optional[float]        # None when no threshold configured
    per_slot_snr: np.ndarray            # (N,) linear

    def __post_init__(self):
        object.__setattr__(self, "per_slot_snr", _freeze(self.per_slot_snr))


# ---------------------------------------------------------------------------
# Physical-layer formulas.


def distance(q, k: int, scn: Scenario) -> float:
    """Slant distance between the vehicle at horizontal q and sensor k."""
    off = np.asarray(q, dtype=float) - scn.sensor_xy[k]
    return math.sqrt(float(off @ off) + scn.altitude**2)


def channel_gains(q, scn: Scenario) -> np.ndarray:
    """Per-sensor channel power gains beta0 * d^(-alpha) at horizontal q."""
    off = scn.sensor_xy - np.asarray(q, dtype=float)
    d2 = np.einsum("kj,kj->k", off, off) + scn.altitude**2
    return scn.channel.beta0 * d2 ** (-scn.channel.alpha / 2.0)


def gains_at(points: np.ndarray, scn: Scenario) -> np.ndarray:
    """Channel power gains for many horizontal points at once, shape (M, K)."""
    pts = np.asarray(points, dtype=float)
    diff = pts[:, None, :] - scn.sensor_xy[None, :, :]
    d2 = np.einsum("mkj,mkj->mk", diff, diff) + scn.altitude**2
    return scn.channel.beta0 * d2 ** (-scn.channel.alpha / 2.0)


def channel_amplitude(q, k: int, scn: Scenario) -> float:
    """Amplitude gain sqrt(beta0 * d^(-alpha)) from sensor k."""
    return math.sqrt(float(channel_gains(q, scn)[k]))


def snr(q, powers, scn: Scenario) -> float:
    """Received SNR with coherently combined amplitudes.

    The sensors transmit a shared message with phase pre-compensation, so the
    per-sensor amplitudes sqrt(P_k) * sqrt(beta0 d_k^-alpha) add before
    squaring.
    """
    p = np.asarray(powers, dtype=float)
    amp = float(np.sqrt(p * channel_gains(q, scn)).sum())
    return amp * amp / scn.channel.sigma2


def rate(q, powers, scn: Scenario) -> float:
    """Spectral efficiency log2(1 + SNR) in bps/Hz."""
    return math.log1p(snr(q, powers, scn)) / LN2


def outage_indicator(q, powers, scn: Scenario) -> int:
    """1 if the received SNR is strictly below the threshold, else 0.

    The boundary SNR == gamma_min counts as non-outage.
    """
    gamma = scn.require_gamma()
    return 1 if snr(q, powers, scn) < gamma else 0


def evaluate_plan(plan: DiscretePlan, scn: Scenario) -> TrajectoryMetrics:
    """Time-averaged rate, outage fraction, and per-slot SNRs of a plan.

    The outage fraction is None when the scenario carries no SNR threshold.
    """
    g = gains_at(plan.waypoints, scn)                       # (N, K)
    amp = np.sqrt(plan.powers * g).sum(axis=1)              # (N,)
    s = amp * amp / scn.channel.sigma2
    avg_rate = float(np.log1p(s).mean() / LN2)
    out = None
    if scn.gamma_min is not None:
        out = float(np.mean(s < scn.gamma_min))
    return TrajectoryMetrics(avg_rate=avg_rate, outage_prob=out, per_slot_snr=s)


def check_plan(plan: DiscretePlan, scn: Scenario, tol: float = 1e-6) -> list:
    """Machine-check a plan's kinematic and budget invariants.

    Returns a list of human-readable violation strings (empty when valid).
    """
    bad = []
    step_cap = scn.v_max * plan.slot_len + tol
    pts = np.vstack([scn.q_init, plan.waypoints])
    steps = np.linalg.norm(np.diff(pts, axis=0), axis=1)
    if np.any(steps > step_cap):
        n = int(np.argmax(steps - step_cap))
        bad.append(f"slot {n + 1}: step {steps[n]:.6g} m exceeds {step_cap:.6g} m")
    if np.linalg.norm(plan.waypoints[-1] - scn.q_final) > tol:
        bad.append("final waypoint differs from q_final")
    avg = plan.powers.mean(axis=0)
    over = avg - scn.p_avg
    if np.any(over > POWER_SLACK_W):
        k = int(np.argmax(over))
        bad.append(f"sensor {k}: average power {avg[k]:.9g} W over budget")
    return bad


# ---------------------------------------------------------------------------
# Scenario ingestion (JSON boundary, decibel fields converted on load).


def validate_scenario(raw: dict) -> Scenario:
    """Build a Scenario from a parsed scenario file.

    Expected keys: ``sensors`` (list of {x_m, y_m, p_avg_dbm}), ``uav``
    ({altitude_m, v_max_mps, horizon_s, q_init_m, q_final_m}), ``channel``
    ({beta0_db, sigma2_dbm, alpha}), optional ``gamma_min_db`` and
    ``region_m`` ([x_lo, x_hi, y_lo, y_hi]).
    """
    if not isinstance(raw, dict):
        raise ConfigError("scenario file must hold a JSON object")
    try:
        sensors = tuple(
            SensorSpec(
                np.array([s["x_m"], s["y_m"]], dtype=float),
                dbm_to_watts(s["p_avg_dbm"]),
            )
            for s in raw["sensors"]
        )
        uav = raw["uav"]
        ch = raw["channel"]
        channel = ChannelParams(
            beta0=db_to_linear(ch["beta0_db"]),
            sigma2=dbm_to_watts(ch["sigma2_dbm"]),
            alpha=float(ch["alpha"]),
        )
        gamma = None
        if raw.get("gamma_min_db") is not None:
            gamma = db_to_linear(raw["gamma_min_db"])
        region = None
        if raw.get("region_m") is not None:
            region = Rect(*[float(v) for v in raw["region_m"]])
        return Scenario(
            sensors=sensors,
            altitude=float(uav["altitude_m"]),
            v_max=float(uav["v_max_mps"]),
            horizon=float(uav["horizon_s"]),
            q_init=np.asarray(uav["q_init_m"], dtype=float),
            q_final=np.asarray(uav["q_final_m"], dtype=float),
            channel=channel,
            gamma_min=gamma,
            region=region,
        )
    except (KeyError, TypeError, IndexError) as exc:
        raise ConfigError(f"malformed scenario description: {exc!r}") from exc


def load_scenario(path) -> Scenario:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"scenario file is not valid JSON: {exc}") from exc
    return validate_scenario(raw)
