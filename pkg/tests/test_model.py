"""Physical model: conversions, SNR/rate formulas, plan metrics, ingestion."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from beamplan import (
    DiscretePlan,
    InfeasibleHorizon,
    MissingThreshold,
    NonPositiveParameter,
    Scenario,
    SensorSpec,
    channel_amplitude,
    distance,
    evaluate_plan,
    outage_indicator,
    rate,
    snr,
    validate_scenario,
)
from beamplan.errors import ConfigError
from beamplan.model import (
    Rect,
    db_to_linear,
    dbm_to_watts,
    linear_to_db,
    watts_to_dbm,
)

from conftest import make_channel, scenario_json, two_sensor_scenario


class TestConversions:
    def test_dbm_to_watts(self):
        assert dbm_to_watts(30.0) == pytest.approx(1.0, rel=1e-12)
        assert dbm_to_watts(-60.0) == pytest.approx(1e-9, rel=1e-12)

    def test_db_to_linear(self):
        assert db_to_linear(-30.0) == pytest.approx(1e-3, rel=1e-12)
        # 10^(27.4/10), direct evaluation
        assert db_to_linear(27.4) == pytest.approx(549.5408739, rel=1e-9)

    def test_round_trips(self):
        assert watts_to_dbm(dbm_to_watts(17.3)) == pytest.approx(17.3, abs=1e-12)
        assert linear_to_db(db_to_linear(-4.2)) == pytest.approx(-4.2, abs=1e-12)

    def test_nonpositive_rejected(self):
        with pytest.raises(NonPositiveParameter):
            watts_to_dbm(0.0)
        with pytest.raises(NonPositiveParameter):
            linear_to_db(-1.0)


class TestScenario:
    def test_valid_bench_layout(self):
        raw = scenario_json("bench", horizon_s=20.0)
        scn = validate_scenario(raw)
        assert scn.n_sensors == 10
        assert scn.region.x_lo == 0.0 and scn.region.x_hi == 200.0
        assert scn.channel.beta0 == pytest.approx(1e-3)

    def test_degenerate_pinned(self):
        raw = scenario_json("two", horizon_s=0.0)
        scn = validate_scenario(raw)
        assert scn.horizon == 0.0

    def test_infeasible_horizon(self):
        # 283 m at 40 m/s needs 7.07 s > 5 s.
        raw = scenario_json("bench", horizon_s=5.0)
        raw["uav"]["q_final_m"] = [200.0, 200.0]
        with pytest.raises(InfeasibleHorizon):
            validate_scenario(raw)

    def test_nonpositive_parameter(self):
        raw = scenario_json("two")
        raw["uav"]["altitude_m"] = 0.0
        with pytest.raises(NonPositiveParameter):
            validate_scenario(raw)
        raw = scenario_json("two")
        raw["sensors"][0]["p_avg_dbm"] = None
        with pytest.raises(ConfigError):
            validate_scenario(raw)

    def test_region_default_is_bounding_box(self):
        scn = two_sensor_scenario(80.0)
        r = scn.region
        assert (r.x_lo, r.x_hi, r.y_lo, r.y_hi) == (-40.0, 40.0, 0.0, 0.0)

    def test_explicit_region_must_contain_everything(self):
        raw = scenario_json("two")
        raw["region_m"] = [-10.0, 10.0, -10.0, 10.0]
        with pytest.raises(ConfigError):
            validate_scenario(raw)

    def test_gamma_loaded_linearly(self):
        raw = scenario_json("two", gamma_db=17.0)
        scn = validate_scenario(raw)
        assert scn.gamma_min == pytest.approx(db_to_linear(17.0))


class TestRect:
    def test_grid_includes_endpoints(self):
        r = Rect(0.0, 10.5, 0.0, 0.0)
        nodes = r.grid_nodes(1.0)
        assert nodes[0, 0] == 0.0 and nodes[-1, 0] == 10.5
        assert nodes.shape[1] == 2

    def test_degenerate_axis(self):
        nodes = Rect(-3.0, 3.0, 5.0, 5.0).grid_nodes(1.0)
        assert nodes.shape == (7, 2)
        assert np.all(nodes[:, 1] == 5.0)

    def test_lexicographic_order(self):
        nodes = Rect(0.0, 2.0, 0.0, 2.0).grid_nodes(1.0)
        keys = [tuple(p) for p in nodes]
        assert keys == sorted(keys)


class TestPhysics:
    def setup_method(self):
        self.scn = two_sensor_scenario(80.0)

    def test_distance_overhead(self):
        assert distance(self.scn.sensor_xy[0], 0, self.scn) == pytest.approx(50.0)

    def test_distance_345(self):
        q = self.scn.sensor_xy[0] + np.array([30.0, 40.0])
        assert distance(q, 0, self.scn) == pytest.approx(math.sqrt(5000.0))

    def test_distance_oblique(self):
        q = self.scn.sensor_xy[0] + np.array([80.0, 0.0])
        assert distance(q, 0, self.scn) == pytest.approx(math.sqrt(8900.0))

    def test_amplitude_value(self):
        # sqrt(1e-3 * 50^-2.8) directly above the sensor
        a = channel_amplitude(self.scn.sensor_xy[0], 0, self.scn)
        assert a == pytest.approx(math.sqrt(1e-3 * 50.0**-2.8), rel=1e-12)
        assert a == pytest.approx(1.3226e-4, rel=1e-4)

    def test_amplitude_monotone(self):
        s = self.scn.sensor_xy[0]
        a50 = channel_amplitude(s, 0, self.scn)
        a100 = channel_amplitude(s + [100.0, 0.0], 0, self.scn)
        assert a100 < a50

    def test_snr_zero_power(self):
        assert snr([0.0, 0.0], np.zeros(2), self.scn) == 0.0

    def test_snr_single_sensor_value(self):
        # 1 W over one sensor: 1e-3 * 50^-2.8 / 1e-9
        scn = two_sensor_scenario(80.0)
        p = np.array([1.0, 0.0])
        expected = 1e-3 * 50.0**-2.8 / 1e-9
        assert snr(scn.sensor_xy[0], p, scn) == pytest.approx(expected, rel=1e-12)
        assert expected == pytest.approx(17.49, abs=0.01)

    def test_coherent_gain_quadruples(self):
        # Two equidistant equal-power sensors: exactly 4x one sensor.
        scn = two_sensor_scenario(80.0)
        mid = np.array([0.0, 0.0])
        s1 = snr(mid, np.array([1.0, 0.0]), scn)
        s2 = snr(mid, np.array([1.0, 1.0]), scn)
        assert s2 == pytest.approx(4.0 * s1, rel=1e-12)

    def test_rate_values(self):
        scn = self.scn
        assert rate([0, 0], np.zeros(2), scn) == 0.0
        p = np.array([1.0, 0.0])
        s = snr(scn.sensor_xy[0], p, scn)
        assert rate(scn.sensor_xy[0], p, scn) == pytest.approx(
            math.log2(1 + s), rel=1e-12
        )
        assert math.log2(1 + 17.49) == pytest.approx(4.209, abs=5e-4)

    def test_outage_indicator_branches(self):
        scn = two_sensor_scenario(80.0, gamma_db=17.0)
        gamma = scn.gamma_min
        assert outage_indicator([0, 0], np.zeros(2), scn) == 1
        # Boundary counts as non-outage: scale powers to hit gamma exactly.
        p = np.array([1.0, 1.0])
        s = snr([0.0, 0.0], p, scn)
        p_exact = p * (gamma / s)
        assert snr([0.0, 0.0], p_exact, scn) == pytest.approx(gamma, rel=1e-12)
        assert outage_indicator([0.0, 0.0], p_exact * (1 + 1e-12), scn) == 0
        assert outage_indicator([0.0, 0.0], p_exact * (1 - 1e-9), scn) == 1

    def test_indicator_needs_threshold(self):
        with pytest.raises(MissingThreshold):
            outage_indicator([0, 0], np.ones(2), two_sensor_scenario(80.0))


@settings(max_examples=40, deadline=None)
@given(
    c=st.floats(min_value=1e-6, max_value=1e6),
    px=st.floats(min_value=0.0, max_value=5.0),
    py=st.floats(min_value=0.0, max_value=5.0),
)
def test_snr_power_homogeneity(c, px, py):
    scn = two_sensor_scenario(80.0)
    p = np.array([px, py])
    q = np.array([10.0, 0.0])
    assert snr(q, c * p, scn) == pytest.approx(c * snr(q, p, scn), rel=1e-12)


@settings(max_examples=30, deadline=None)
@given(offset=st.floats(min_value=0.0, max_value=200.0))
def test_rate_decreases_with_distance(offset):
    scn = two_sensor_scenario(80.0)
    p = np.array([1.0, 0.0])
    s = scn.sensor_xy[0]
    near = rate(s + [offset, 0.0], p, scn)
    far = rate(s + [offset + 1.0, 0.0], p, scn)
    assert far < near


class TestEvaluatePlan:
    def _plan(self, scn, wp, powers):
        return DiscretePlan(
            n_slots=wp.shape[0],
            slot_len=scn.horizon / wp.shape[0],
            waypoints=wp,
            powers=powers,
        )

    def test_zero_powers(self):
        scn = two_sensor_scenario(80.0, gamma_db=17.0)
        wp = np.zeros((4, 2))
        m = evaluate_plan(self._plan(scn, wp, np.zeros((4, 2))), scn)
        assert m.avg_rate == 0.0 and m.outage_prob == 1.0

    def test_boundary_slot_not_outage(self):
        scn = two_sensor_scenario(80.0, gamma_db=17.0)
        wp = np.zeros((1, 2))
        p = np.ones((1, 2))
        s = evaluate_plan(self._plan(scn, wp, p), scn).per_slot_snr[0]
        exact = p * (scn.gamma_min / s) * (1 + 1e-12)
        m = evaluate_plan(self._plan(scn, wp, exact), scn)
        assert m.outage_prob == 0.0

    def test_hover_equals_point_rate(self):
        scn = two_sensor_scenario(80.0)
        wp = np.tile([12.0, 0.0], (8, 1))
        p = np.tile([0.4, 0.7], (8, 1))
        m = evaluate_plan(self._plan(scn, wp, p), scn)
        assert m.avg_rate == pytest.approx(
            rate([12.0, 0.0], [0.4, 0.7], scn), rel=1e-12
        )
        assert m.outage_prob is None

    def test_concatenation_invariance(self):
        scn = two_sensor_scenario(80.0, gamma_db=17.0)
        rng = np.random.default_rng(7)
        wp = rng.uniform(-40, 40, size=(6, 2)) * [1.0, 0.0]
        p = rng.uniform(0, 2, size=(6, 2))
        one = evaluate_plan(self._plan(scn, wp, p), scn)
        two = evaluate_plan(
            self._plan(scn, np.vstack([wp, wp]), np.vstack([p, p])), scn
        )
        assert two.avg_rate == pytest.approx(one.avg_rate, rel=1e-12)
        assert two.outage_prob == pytest.approx(one.outage_prob, rel=1e-12)
