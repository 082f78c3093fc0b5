"""Shared scenario builders and session-scoped heavy solves."""

import time

import numpy as np
import pytest

from beamplan import (
    ChannelParams,
    Scenario,
    SensorSpec,
    SolveConfig,
    solve_relaxed_outage,
    solve_relaxed_rate,
)
from beamplan.config import DEFAULT_CONFIG
from beamplan.model import db_to_linear, dbm_to_watts

# Ten-sensor benchmark layout (meters).
BENCH_SENSORS = [
    (20, 10), (30, 28), (46, 0), (56, 24), (94, 168),
    (100, 200), (112, 176), (162, 0), (178, 40), (200, 6),
]


def make_channel(beta0_db=-30.0, sigma2_dbm=-60.0, alpha=2.8):
    return ChannelParams(
        beta0=db_to_linear(beta0_db),
        sigma2=dbm_to_watts(sigma2_dbm),
        alpha=alpha,
    )


def two_sensor_scenario(
    distance_m=80.0,
    horizon_s=10.0,
    p_avg_dbm=30.0,
    gamma_db=None,
    q_init=(0.0, 0.0),
    q_final=(0.0, 0.0),
):
    """Symmetric pair on the x-axis; region degenerates to that axis."""
    half = distance_m / 2.0
    sensors = (
        SensorSpec(np.array([-half, 0.0]), dbm_to_watts(p_avg_dbm)),
        SensorSpec(np.array([half, 0.0]), dbm_to_watts(p_avg_dbm)),
    )
    return Scenario(
        sensors=sensors,
        altitude=50.0,
        v_max=40.0,
        horizon=horizon_s,
        q_init=np.array(q_init, dtype=float),
        q_final=np.array(q_final, dtype=float),
        channel=make_channel(),
        gamma_min=None if gamma_db is None else db_to_linear(gamma_db),
    )


def single_sensor_scenario(horizon_s=10.0, p_avg_dbm=30.0, gamma_db=None):
    sensors = (SensorSpec(np.array([30.0, 20.0]), dbm_to_watts(p_avg_dbm)),)
    return Scenario(
        sensors=sensors,
        altitude=50.0,
        v_max=40.0,
        horizon=horizon_s,
        q_init=np.array([0.0, 0.0]),
        q_final=np.array([60.0, 40.0]),
        channel=make_channel(),
        gamma_min=None if gamma_db is None else db_to_linear(gamma_db),
    )


def bench_scenario(horizon_s=20.0, p_avg_dbm=30.0, gamma_db=None):
    """Ten-sensor benchmark with endpoints (0,0) -> (200,200)."""
    sensors = tuple(
        SensorSpec(np.array(p, dtype=float), dbm_to_watts(p_avg_dbm))
        for p in BENCH_SENSORS
    )
    return Scenario(
        sensors=sensors,
        altitude=50.0,
        v_max=40.0,
        horizon=horizon_s,
        q_init=np.array([0.0, 0.0]),
        q_final=np.array([200.0, 200.0]),
        channel=make_channel(),
        gamma_min=None if gamma_db is None else db_to_linear(gamma_db),
    )


def scenario_json(scn_kind="two", **kw):
    """Scenario-file dict matching the on-disk schema."""
    if scn_kind == "two":
        d = kw.get("distance_m", 80.0)
        sensors = [
            {"x_m": -d / 2, "y_m": 0.0, "p_avg_dbm": kw.get("p_avg_dbm", 30.0)},
            {"x_m": d / 2, "y_m": 0.0, "p_avg_dbm": kw.get("p_avg_dbm", 30.0)},
        ]
        qi, qf = [0.0, 0.0], [0.0, 0.0]
    else:
        sensors = [
            {"x_m": float(x), "y_m": float(y), "p_avg_dbm": kw.get("p_avg_dbm", 30.0)}
            for x, y in BENCH_SENSORS
        ]
        qi, qf = [0.0, 0.0], [200.0, 200.0]
    out = {
        "sensors": sensors,
        "uav": {
            "altitude_m": 50.0,
            "v_max_mps": 40.0,
            "horizon_s": kw.get("horizon_s", 10.0),
            "q_init_m": qi,
            "q_final_m": qf,
        },
        "channel": {"beta0_db": -30.0, "sigma2_dbm": -60.0, "alpha": 2.8},
    }
    if kw.get("gamma_db") is not None:
        out["gamma_min_db"] = kw["gamma_db"]
    return out


class Timed:
    def __init__(self, value, seconds):
        self.value = value
        self.seconds = seconds


def _timed(fn, *args, **kw):
    t0 = time.perf_counter()
    out = fn(*args, **kw)
    return Timed(out, time.perf_counter() - t0)


@pytest.fixture(scope="session")
def cfg():
    return DEFAULT_CONFIG


@pytest.fixture(scope="session")
def ex_rate_d80(cfg):
    return _timed(solve_relaxed_rate, two_sensor_scenario(80.0), cfg)


@pytest.fixture(scope="session")
def ex_rate_d40(cfg):
    return _timed(solve_relaxed_rate, two_sensor_scenario(40.0), cfg)


@pytest.fixture(scope="session")
def ex_outage_d80(cfg):
    return _timed(
        solve_relaxed_outage, two_sensor_scenario(80.0, gamma_db=17.0), cfg
    )


@pytest.fixture(scope="session")
def ex_outage_d40(cfg):
    return _timed(
        solve_relaxed_outage, two_sensor_scenario(40.0, gamma_db=17.0), cfg
    )


@pytest.fixture(scope="session")
def bench_rate_relaxed(cfg):
    return _timed(solve_relaxed_rate, bench_scenario(), cfg)


@pytest.fixture(scope="session")
def bench_outage_relaxed(cfg):
    return _timed(solve_relaxed_outage, bench_scenario(gamma_db=27.4), cfg)
