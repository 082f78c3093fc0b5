"""Ellipsoid method, bisection, and the log-barrier maximizer."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from beamplan.config import DEFAULT_CONFIG
from beamplan.convex import (
    BudgetRows,
    CallbackRows,
    LinearRows,
    SmoothProgram,
    bisect,
    ellipsoid_optimize,
    feasible_start,
    maximize_smooth,
)
from beamplan.errors import NoSignChange, NoStrictlyFeasibleStart

cfg = DEFAULT_CONFIG


class TestEllipsoid:
    def test_absolute_value_1d(self):
        res = ellipsoid_optimize(
            lambda x: (abs(x[0] - 2.0), np.array([np.sign(x[0] - 2.0)])),
            np.array([0.0]), 10.0, None, cfg, tol=1e-8,
        )
        assert res.x[0] == pytest.approx(2.0, abs=1e-4)
        assert res.converged

    def test_max_coordinate_with_floor(self):
        def oracle(x):
            i = int(np.argmax(x))
            g = np.zeros(2)
            g[i] = 1.0
            return float(x.max()), g

        res = ellipsoid_optimize(
            oracle, np.array([3.0, 1.0]), 10.0, np.zeros(2), cfg, tol=1e-9
        )
        assert np.all(np.abs(res.x) <= 1e-4)

    def test_running_minimum_nonincreasing(self):
        def oracle(x):
            return float((x**2).sum()), 2 * x

        res = ellipsoid_optimize(oracle, np.array([2.0, -3.0]), 8.0, None, cfg)
        assert np.all(np.diff(res.best_values) <= 1e-15)
        assert res.certified_gap <= cfg.tol_obj

    def test_smooth_quadratic_nd(self):
        target = np.array([0.5, -1.5, 2.0])

        def oracle(x):
            return float(((x - target) ** 2).sum()), 2 * (x - target)

        res = ellipsoid_optimize(oracle, np.zeros(3), 10.0, None, cfg, tol=1e-10)
        assert res.x == pytest.approx(target, abs=1e-4)

    def test_deterministic(self):
        def oracle(x):
            return abs(x[0] - 1.0) + abs(x[1] + 2.0), np.sign(x - [1.0, -2.0])

        a = ellipsoid_optimize(oracle, np.zeros(2), 5.0, None, cfg)
        b = ellipsoid_optimize(oracle, np.zeros(2), 5.0, None, cfg)
        assert np.array_equal(a.x, b.x) and a.iterations == b.iterations


class TestBisect:
    def test_continuous_threshold(self):
        val = bisect(lambda x: x < 0.7, 0.0, 1.0, tol=1e-6)
        assert val == pytest.approx(0.7, abs=1e-6)

    def test_continuous_flipped(self):
        val = bisect(lambda x: x >= 0.3, 0.0, 1.0, tol=1e-7)
        assert val == pytest.approx(0.3, abs=1e-7)

    def test_no_sign_change(self):
        with pytest.raises(NoSignChange):
            bisect(lambda x: True, 0.0, 1.0)

    def test_integer_largest_true(self):
        assert bisect(lambda n: n <= 77, 1, 128, integer=True) == 77

    def test_integer_all_true(self):
        assert bisect(lambda n: True, 0, 128, integer=True) == 128

    @settings(max_examples=25, deadline=None)
    @given(theta=st.integers(min_value=0, max_value=128))
    def test_integer_exact(self, theta):
        assert bisect(lambda n: n <= theta, 0, 128, integer=True) == theta


def _quad_objective(center):
    c = np.asarray(center, dtype=float)

    def obj(x):
        return (
            -float(((x - c) ** 2).sum()),
            -2.0 * (x - c),
            ("dense", 2.0 * np.eye(c.size)),
        )

    return obj


class TestBarrier:
    def test_monotone_objective_hits_box(self):
        def obj(x):
            return math.log2(1 + x[0]), np.array([1 / ((1 + x[0]) * math.log(2))]), (
                "dense", np.array([[1 / ((1 + x[0]) ** 2 * math.log(2))]])
            )

        prog = SmoothProgram(
            1, obj, [], lower=np.array([0.0]), upper=np.array([5.0])
        )
        res = maximize_smooth(prog, np.array([1.0]), cfg)
        assert res.value == pytest.approx(math.log2(6.0), abs=1e-5)
        assert res.converged

    def test_unconstrained_in_box(self):
        prog = SmoothProgram(
            1, _quad_objective([3.0]), [],
            lower=np.array([0.0]), upper=np.array([10.0]),
        )
        res = maximize_smooth(prog, np.array([5.0]), cfg)
        assert res.x[0] == pytest.approx(3.0, abs=1e-6)

    def test_callback_rows(self):
        # maximize -(x-3)^2 - (y-3)^2 st x + y <= 4: optimum (2, 2).
        rows = CallbackRows(
            [lambda z: (4.0 - z[0] - z[1], np.array([-1.0, -1.0]), None)], dim=2
        )
        prog = SmoothProgram(2, _quad_objective([3.0, 3.0]), [rows])
        res = maximize_smooth(prog, np.array([0.5, 0.5]), cfg)
        assert res.x == pytest.approx([2.0, 2.0], abs=1e-5)

    def test_kkt_stationarity_residual(self):
        rows = LinearRows(np.array([[-1.0, -1.0]]), np.array([-4.0]))  # x+y <= 4
        prog = SmoothProgram(2, _quad_objective([3.0, 3.0]), [rows])
        res = maximize_smooth(prog, np.array([0.5, 0.5]), cfg)
        grad = -2.0 * (res.x - 3.0)
        nu = res.multipliers[0]
        residual = grad + rows.a.T @ nu
        assert np.all(nu >= 0)
        assert np.linalg.norm(residual) <= 1e-5

    def test_phase_one_recovers_interior(self):
        rows = LinearRows(np.array([[1.0, 1.0]]), np.array([1.5]))  # x+y >= 1.5
        prog = SmoothProgram(
            2, _quad_objective([0.0, 0.0]), [rows],
            lower=np.zeros(2), upper=np.full(2, 2.0),
        )
        x = feasible_start(prog, np.array([0.1, 0.1]), cfg)
        assert rows.eval(x)[0][0] > 0
        res = maximize_smooth(prog, np.array([0.1, 0.1]), cfg)
        assert res.x == pytest.approx([0.75, 0.75], abs=1e-4)

    def test_empty_interior_raises(self):
        rows = LinearRows(np.array([[1.0], [-1.0]]), np.array([1.0, -1.0]))
        prog = SmoothProgram(1, _quad_objective([0.0]), [rows])
        with pytest.raises(NoStrictlyFeasibleStart):
            maximize_smooth(prog, np.array([0.0]), cfg)

    def test_block_path_matches_dense(self):
        ns, nk = 6, 2
        blocks = np.arange(ns * nk).reshape(ns, nk)
        rng = np.random.default_rng(3)
        c = rng.uniform(0.5, 1.5, size=(ns, nk))

        def obj_common(x, as_blocks):
            b = x[blocks]
            u = (c * b).sum(axis=1)
            val = float(np.log1p(u).sum())
            grad = np.zeros(ns * nk)
            grad[blocks.ravel()] = (c / (1 + u)[:, None]).ravel()
            stack = np.einsum("n,ni,nj->nij", 1 / (1 + u) ** 2, c, c)
            if as_blocks:
                return val, grad, ("blocks", stack)
            h = np.zeros((ns * nk, ns * nk))
            for n in range(ns):
                h[np.ix_(blocks[n], blocks[n])] = stack[n]
            return val, grad, ("dense", h)

        def budget():
            return BudgetRows(
                cols=np.stack([blocks[:, k] for k in range(nk)]),
                coeff=1.0 / ns,
                caps=np.array([1.0, 0.4]),
                dim=ns * nk,
            )

        x0 = np.full(ns * nk, 0.05)
        dense = maximize_smooth(
            SmoothProgram(ns * nk, lambda x: obj_common(x, False), [budget()],
                          lower=np.zeros(ns * nk)),
            x0, cfg,
        )
        block = maximize_smooth(
            SmoothProgram(ns * nk, lambda x: obj_common(x, True), [budget()],
                          lower=np.zeros(ns * nk), blocks=blocks),
            x0, cfg,
        )
        assert block.value == pytest.approx(dense.value, rel=1e-9)
        assert block.x == pytest.approx(dense.x, abs=1e-6)

    def test_two_slot_equal_split(self):
        """One sensor, two slots, equal gains: optimum splits power evenly.

        Cross-checked against a dense scan over the split fraction.
        """
        gain = 0.8
        budget_w = 1.0

        def obj(x):
            u = gain * x
            val = float(np.log1p(u).sum())
            grad = gain / (1 + u)
            return val, grad, ("dense", np.diag(gain**2 / (1 + u) ** 2))

        rows = BudgetRows(
            cols=np.array([[0, 1]]), coeff=0.5, caps=np.array([budget_w]), dim=2
        )
        prog = SmoothProgram(2, obj, [rows], lower=np.zeros(2))
        res = maximize_smooth(prog, np.array([0.3, 0.3]), cfg)
        # b^2 is the per-slot power; equal split puts budget_w in each slot.
        assert res.x[0] ** 2 == pytest.approx(budget_w, rel=1e-4)
        assert res.x[1] ** 2 == pytest.approx(budget_w, rel=1e-4)

        fracs = np.linspace(0.0, 1.0, 2001)
        p1 = 2 * budget_w * fracs
        p2 = 2 * budget_w * (1 - fracs)
        scan = np.log1p(gain * np.sqrt(p1)) + np.log1p(gain * np.sqrt(p2))
        assert res.value == pytest.approx(float(scan.max()), rel=1e-6)

    def test_deterministic(self):
        prog = SmoothProgram(
            2, _quad_objective([1.0, 2.0]), [],
            lower=np.zeros(2), upper=np.full(2, 5.0),
        )
        a = maximize_smooth(prog, np.array([0.5, 0.5]), cfg)
        b = maximize_smooth(prog, np.array([0.5, 0.5]), cfg)
        assert np.array_equal(a.x, b.x)
