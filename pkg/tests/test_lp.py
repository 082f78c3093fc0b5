"""Simplex solver: exactness against a vertex-enumeration oracle."""

import itertools

import numpy as np
import pytest

from beamplan.convex import LinearProgram, solve_lp
from beamplan.errors import Infeasible, Unbounded


def vertex_oracle(lp: LinearProgram):
    """Optimal objective by enumerating basic feasible points (m <= 6)."""
    m = lp.c.size
    rows = [(a, b) for a, b in zip(lp.rows_a, lp.rows_b)]
    for j in range(m):
        e = np.zeros(m)
        e[j] = -1.0
        rows.append((e, -lp.lower[j]))  # x_j >= lower_j
    best = None
    for combo in itertools.combinations(range(len(rows)), m):
        a = np.array([rows[i][0] for i in combo])
        b = np.array([rows[i][1] for i in combo])
        try:
            x = np.linalg.solve(a, b)
        except np.linalg.LinAlgError:
            continue
        feas = all(
            float(r @ x) <= rhs + 1e-9 * max(1.0, abs(rhs)) for r, rhs in rows
        )
        if feas:
            v = float(lp.c @ x)
            if best is None or v > best:
                best = v
    return best


class TestBasics:
    def test_single_binding_row(self):
        lp = LinearProgram(
            c=np.array([1.0, 1.0]), rows_a=np.array([[1.0, 1.0]]),
            rows_b=np.array([10.0]),
        )
        sol = solve_lp(lp)
        assert sol.objective == pytest.approx(10.0, abs=1e-12)

    def test_infeasible(self):
        lp = LinearProgram(
            c=np.array([1.0]), rows_a=np.array([[1.0]]), rows_b=np.array([-1.0])
        )
        with pytest.raises(Infeasible):
            solve_lp(lp)

    def test_unbounded(self):
        lp = LinearProgram(
            c=np.array([1.0, 0.0]), rows_a=np.array([[0.0, 1.0]]),
            rows_b=np.array([1.0]),
        )
        with pytest.raises(Unbounded):
            solve_lp(lp)

    def test_lower_bounds_shift(self):
        lp = LinearProgram(
            c=np.array([-1.0]),
            rows_a=np.array([[1.0]]),
            rows_b=np.array([10.0]),
            lower=np.array([2.0]),
        )
        sol = solve_lp(lp)
        assert sol.x[0] == pytest.approx(2.0, abs=1e-12)

    def test_negative_rhs_phase1(self):
        # x >= 3 encoded as -x <= -3, maximize -x  ->  x = 3.
        lp = LinearProgram(
            c=np.array([-1.0]), rows_a=np.array([[-1.0]]), rows_b=np.array([-3.0])
        )
        sol = solve_lp(lp)
        assert sol.x[0] == pytest.approx(3.0, abs=1e-9)

    def test_symmetric_hover_durations(self):
        """Two mirror-image hover columns, 10 s horizon, unit budgets.

        Budget rows force equal 5 s durations when the column powers are a
        swapped pair summing to twice the budget.
        """
        p_hi, p_lo = 1.6824, 0.3176
        r = 5.5
        lp = LinearProgram(
            c=np.array([r, r]),
            rows_a=np.array([[p_hi, p_lo], [p_lo, p_hi], [1.0, 1.0]]),
            rows_b=np.array([10.0, 10.0, 10.0]),
        )
        sol = solve_lp(lp)
        assert sol.x == pytest.approx([5.0, 5.0], abs=1e-9)
        assert sol.objective == pytest.approx(10 * r, rel=1e-12)

    def test_duals_certify_optimality(self):
        lp = LinearProgram(
            c=np.array([3.0, 2.0]),
            rows_a=np.array([[1.0, 1.0], [2.0, 1.0]]),
            rows_b=np.array([4.0, 6.0]),
        )
        sol = solve_lp(lp)
        y = sol.duals
        assert np.all(y >= -1e-12)
        # Weak duality at the optimum: b.y equals the primal objective.
        assert float(lp.rows_b @ y) == pytest.approx(sol.objective, rel=1e-10)
        # Dual feasibility: A^T y >= c.
        assert np.all(lp.rows_a.T @ y >= lp.c - 1e-9)


@pytest.mark.parametrize("seed", range(12))
def test_random_instances_match_vertex_enumeration(seed):
    rng = np.random.default_rng(seed)
    m = int(rng.integers(2, 5))
    n = int(rng.integers(m, 7))
    a = rng.normal(size=(n, m))
    x_feas = rng.uniform(0.2, 1.0, size=m)
    b = a @ x_feas + rng.uniform(0.1, 1.0, size=n)
    a = np.vstack([a, np.eye(m)])          # box rows keep it bounded
    b = np.append(b, rng.uniform(1.5, 3.0, size=m))
    c = rng.normal(size=m)
    lp = LinearProgram(c=c, rows_a=a, rows_b=b)
    sol = solve_lp(lp)
    assert sol.objective == pytest.approx(vertex_oracle(lp), abs=1e-8)
    assert np.all(a @ sol.x <= b + 1e-8)
