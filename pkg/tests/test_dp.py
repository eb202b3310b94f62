"""Tests for the backward-induction solver and its cost-to-go tables.

The two-slot layer is checked against the closed-form single-threshold rule
and its quadrature cost; deeper layers are checked against brute-force grid
minimization, a degenerate-channel closed form, and the stationarity
condition satisfied by the optimal three-slot split.
"""

from __future__ import annotations

import math
import warnings

import numpy as np
import pytest
from scipy.optimize import minimize_scalar

from bitsched import (
    DegenerateTest,
    DpConfig,
    DpPolicy,
    GridTooCoarse,
    OutOfTable,
    SuboptimalIIPolicy,
    dp_decide,
    expect,
    iwf_bits,
    load_table,
    moments,
    optimal_T2,
    optimal_T2_cost,
    run,
    solve,
)
from bitsched.dp_solver import golden_min


class TestGoldenMin:
    def test_vector_quadratics(self):
        """Each row's parabola vertex is located to the requested tolerance."""
        centers = np.array([0.3, 1.7, 2.0, 0.0])
        lo = np.zeros(4)
        hi = np.full(4, 2.0)
        x, fx = golden_min(lambda b: (b - centers) ** 2, lo, hi, tol=1e-10)
        np.testing.assert_allclose(x, centers, atol=1e-8)
        np.testing.assert_allclose(fx, 0.0, atol=1e-15)

    def test_boundary_minima_are_exact(self):
        """Monotone objectives return the exact endpoint, not a point nearby."""
        lo = np.array([0.5])
        hi = np.array([3.0])
        x_inc, _ = golden_min(lambda b: b, lo, hi, tol=1e-9)
        x_dec, _ = golden_min(lambda b: -b, lo, hi, tol=1e-9)
        assert x_inc[0] == 0.5
        assert x_dec[0] == 3.0

    def test_degenerate_bracket(self):
        """lo == hi collapses to that point."""
        x, fx = golden_min(lambda b: (b - 1.0) ** 2, np.ones(2), np.ones(2), tol=1e-9)
        np.testing.assert_array_equal(x, 1.0)


class TestFinalSlotLayer:
    def test_last_slot_is_exact(self, t2_table, flagship_moments):
        """value at t=1 equals (2^beta - 1) nu_1 to near machine precision."""
        expected = (np.exp2(t2_table.grid) - 1.0) * flagship_moments.nu1
        np.testing.assert_allclose(t2_table.value[1], expected, rtol=1e-12)

    def test_zero_backlog_costs_nothing(self, t5_table):
        assert np.all(t5_table.value[:, 0] == 0.0)


class TestTwoSlotLayer:
    @pytest.mark.parametrize("B", [1.0, 10.0])
    def test_matches_quadrature_cost(self, t2_table, flagship, B):
        """The t=2 row reproduces the closed-form expected cost within 0.5%."""
        got = t2_table.cost(2, B)
        want = optimal_T2_cost(B, flagship)
        assert abs(got - want) / want < 5e-3

    def test_policy_matches_closed_form(self, t2_table, flagship_moments):
        """decide(2, ...) lands within two grid steps of the exact rule."""
        h = t2_table.b_max / (len(t2_table.grid) - 1)
        rng = np.random.default_rng(12)
        beta = rng.uniform(0.1, 29.0, size=100)
        g = np.exp(rng.uniform(-7, 7, size=100))
        got = t2_table.decide(2, beta, g)
        want = optimal_T2(beta, g, flagship_moments)
        assert np.max(np.abs(got - want)) <= 2 * h


@pytest.fixture(scope="module")
def deg_table():
    return solve(DegenerateTest(0.7), DpConfig(b_max=8.0), T=3)


class TestDegenerateChannelSplitsEvenly:
    def test_values_match_even_split(self, deg_table):
        """With a constant gain the optimal plan is beta/t per slot.

        Linear interpolation of a convex continuation overestimates between
        nodes by a relative O(h ln 2 / 8) near the origin, so the tolerance
        is one part in a thousand across the grid and much tighter at the
        far end where the backlog is many grid steps wide.
        """
        g0 = 0.7
        for t in (1, 2, 3):
            expected = t * (np.exp2(deg_table.grid / t) - 1.0) / g0
            np.testing.assert_allclose(deg_table.value[t], expected, rtol=1e-3, atol=1e-12)
            assert deg_table.value[t][-1] == pytest.approx(expected[-1], rel=1e-5)

    def test_decision_is_even_split(self, deg_table):
        for t, beta in ((2, 5.0), (3, 7.5)):
            assert deg_table.decide(t, beta, 0.7) == pytest.approx(beta / t, abs=1e-6)

    def test_against_two_dimensional_brute_force(self, deg_table):
        """Exhaustive search over both free splits at T=3 finds no better plan."""
        g0, beta = 0.7, 4.0
        b3 = np.linspace(0, beta, 401)[:, None]
        b2 = np.linspace(0, beta, 401)[None, :]
        feasible = b3 + b2 <= beta
        total = (
            (np.exp2(b3) - 1.0) / g0
            + (np.exp2(b2) - 1.0) / g0
            + (np.exp2(beta - b3 - b2) - 1.0) / g0
        )
        best = total[feasible].min()
        table_value = deg_table.cost(3, beta)
        assert table_value <= best + 1e-9
        assert table_value == pytest.approx(best, rel=1e-3)


class TestDecisionStructure:
    def test_final_slot_flushes(self, t5_table):
        assert t5_table.decide(1, 7.25, 0.3) == 7.25

    def test_extreme_gains(self, t5_table):
        """A huge gain sends everything; a vanishing gain defers everything."""
        assert t5_table.decide(3, 6.0, 1e9) == pytest.approx(6.0, abs=1e-6)
        assert t5_table.decide(3, 6.0, 1e-9) == pytest.approx(0.0, abs=1e-6)

    def test_monotone_in_gain_and_backlog(self, t5_table):
        """More gain or more backlog never decreases the allocation."""
        rng = np.random.default_rng(13)
        for _ in range(300):
            t = int(rng.integers(2, 6))
            beta = float(rng.uniform(0.2, 9.5))
            g = float(np.exp(rng.uniform(-5, 5)))
            b = t5_table.decide(t, beta, g)
            assert t5_table.decide(t, beta, g * 1.3) >= b - 1e-6
            assert t5_table.decide(t, min(beta * 1.2, 10.0), g) >= b - 1e-6

    def test_brute_force_grid_agrees(self, t5_table):
        """decide(3, 4, 1) matches a 100k-point scan of the same objective."""
        beta, g = 4.0, 1.0
        b = np.linspace(0.0, beta, 100_001)
        objective = (np.exp2(b) - 1.0) / g + np.interp(
            beta - b, t5_table.grid, t5_table.value[2]
        )
        b_scan = b[np.argmin(objective)]
        assert abs(t5_table.decide(3, beta, g) - b_scan) < 1e-3

    def test_dp_decide_wrapper(self, t5_table):
        """The functional form and the method agree."""
        from bitsched import SchedulerState

        assert dp_decide(t5_table, SchedulerState(t=4, beta=6.0), 0.8) == t5_table.decide(
            4, 6.0, 0.8
        )


class TestValueStructure:
    def test_rows_increase_in_backlog(self, t5_table):
        """More bits to deliver can never cost less."""
        assert np.all(np.diff(t5_table.value[1:], axis=1) >= -1e-12)

    def test_rows_are_convex(self, t5_table):
        """Second differences are nonnegative up to float noise on the row scale."""
        for t in range(1, 6):
            row = t5_table.value[t]
            second = row[2:] - 2.0 * row[1:-1] + row[:-2]
            slack = 1e-7 * np.maximum(1.0, row[1:-1])
            assert np.all(second >= -slack)

    def test_more_slots_never_hurt(self, t5_table):
        """value decreases (weakly) as slots are added at fixed backlog."""
        diffs = t5_table.value[2:] - t5_table.value[1:-1]
        assert np.all(diffs <= 1e-9 * np.maximum(1.0, t5_table.value[1:-1]))

    def test_grid_refinement_converged(self, flagship):
        """Halving the grid step moves the deepest value by < 0.2%."""
        coarse = solve(flagship, DpConfig(b_max=10.0, grid_points=513), T=3)
        fine = solve(flagship, DpConfig(b_max=10.0, grid_points=1025), T=3)
        a = coarse.cost(3, 10.0)
        b = fine.cost(3, 10.0)
        assert abs(a - b) / b < 2e-3


class TestThreeSlotStationarity:
    """The optimal t=3 first-slot split balances marginal cost against the
    derivative of the two-slot continuation, which has the closed form

        2^b / g = 2^d nu_1 F(2^-d / nu_1)
                  + 2^(d/2) sqrt(nu_1) E[x^(-1/2); mid region]
                  + 2^d E[1/x; x >= 2^d / nu_1],   d = beta - b.
    """

    @staticmethod
    def continuation_derivative(channel, nu1, delta):
        lo_k = 2.0**-delta / nu1
        hi_k = 2.0**delta / nu1

        def f(x):
            if x <= lo_k:
                return 2.0**delta * nu1
            if x < hi_k:
                return 2.0 ** (delta / 2.0) * math.sqrt(nu1 / x)
            return 2.0**delta / x

        return expect(channel, np.vectorize(f, otypes=[float]), points=(lo_k, hi_k))

    def test_refined_minimizer_satisfies_the_identity(self, flagship, flagship_moments):
        """Minimizing slot cost + exact two-slot continuation by quadrature
        yields a split whose stationarity residual is below 1e-5."""
        beta, g = 6.0, 1.0
        out = minimize_scalar(
            lambda b: (2.0**b - 1.0) / g + optimal_T2_cost(beta - b, flagship),
            bounds=(0.0, beta),
            method="bounded",
            options={"xatol": 1e-10},
        )
        b_star = out.x
        lhs = 2.0**b_star / g
        rhs = self.continuation_derivative(flagship, flagship_moments.nu1, beta - b_star)
        assert abs(lhs - rhs) / rhs < 1e-5

    def test_table_decision_satisfies_the_identity(self, t10_table, flagship, flagship_moments):
        """The interpolated table decision obeys the same identity up to the
        quantization of one grid step (relative residual about h ln 2)."""
        beta, g = 6.0, 1.0
        h = t10_table.b_max / (len(t10_table.grid) - 1)
        b_tab = t10_table.decide(3, beta, g)
        lhs = 2.0**b_tab / g
        rhs = self.continuation_derivative(flagship, flagship_moments.nu1, beta - b_tab)
        assert abs(lhs - rhs) / rhs < h * math.log(2.0)


class TestMonteCarloSandwich:
    def test_dp_between_heuristic_and_clairvoyant(self, t5_table, flagship, flagship_moments):
        """Mean simulated energy: waterfilling <= dp <= refined heuristic."""
        stats = run(
            [DpPolicy(t5_table), SuboptimalIIPolicy(flagship_moments)],
            flagship,
            B=10.0,
            T=5,
            episodes=20_000,
            seed=99,
        )
        dp_stat, sub2_stat = stats["dp"], stats["sub2"]
        assert dp_stat.mean_energy <= sub2_stat.mean_energy + 4.0 * sub2_stat.stderr

        rng = np.random.default_rng(99)
        g = flagship.sample(rng, (20_000, 5))
        bits, _ = iwf_bits(10.0, g)
        iwf_mean = (((np.exp2(bits) - 1.0) / g).sum(axis=1)).mean()
        assert dp_stat.mean_energy >= iwf_mean - 4.0 * dp_stat.stderr


class TestTableBounds:
    def test_out_of_range_queries_raise(self, t5_table):
        with pytest.raises(OutOfTable):
            t5_table.cost(6, 1.0)
        with pytest.raises(OutOfTable):
            t5_table.cost(0, 1.0)
        with pytest.raises(OutOfTable):
            t5_table.cost(2, 10.5)
        with pytest.raises(OutOfTable):
            t5_table.decide(2, -0.1, 1.0)

    def test_config_validation(self):
        with pytest.raises(ValueError):
            DpConfig(b_max=0.0)
        with pytest.raises(ValueError):
            DpConfig(b_max=10.0, grid_points=1)
        with pytest.raises(ValueError):
            DpConfig(b_max=10.0, quad_nodes=0)


class TestSerialization:
    def test_round_trip_is_exact(self, t5_table, tmp_path):
        """Every table entry survives save/load bit-for-bit."""
        path = tmp_path / "table.csv"
        t5_table.save(path)
        back = load_table(path)
        assert back.channel_spec == t5_table.channel_spec
        assert back.config == t5_table.config
        np.testing.assert_array_equal(back.grid, t5_table.grid)
        np.testing.assert_array_equal(back.value, t5_table.value)

    def test_loaded_table_answers_queries(self, t5_table, tmp_path):
        path = tmp_path / "table.csv"
        t5_table.save(path)
        back = load_table(path)
        assert back.decide(3, 4.0, 1.0) == t5_table.decide(3, 4.0, 1.0)

    def test_rejects_foreign_files(self, tmp_path):
        path = tmp_path / "junk.csv"
        path.write_text("a,b,c\n1,2,3\n")
        with pytest.raises(ValueError):
            load_table(path)


class TestCoarseGridWarning:
    def test_warns_when_undersampled(self, flagship):
        """33 points across 30 bits cannot resolve the exponential tail."""
        with pytest.warns(GridTooCoarse):
            solve(flagship, DpConfig(b_max=30.0, grid_points=33, quad_nodes=64), T=2)

    def test_silent_at_default_resolution(self, flagship):
        with warnings.catch_warnings():
            warnings.simplefilter("error", GridTooCoarse)
            solve(flagship, DpConfig(b_max=10.0), T=2)


class TestDpPolicyObject:
    def test_decisions_stay_feasible(self, t5_table):
        rng = np.random.default_rng(14)
        policy = DpPolicy(t5_table)
        beta = rng.uniform(0, 10, size=200)
        g = np.exp(rng.uniform(-6, 6, size=200))
        for t in (1, 3, 5):
            b = policy.decide(t, beta, g)
            assert np.all(b >= 0.0) and np.all(b <= beta)

    def test_vector_matches_scalar(self, t5_table):
        """Batched and scalar evaluation agree to the search tolerance.

        (Bracket widths differ per element, so the shared iteration count of
        the batched search lands within inner_tol of the scalar result rather
        than bitwise on it.)"""
        policy = DpPolicy(t5_table)
        beta = np.array([1.0, 4.0, 9.0])
        g = np.array([0.3, 1.0, 3.0])
        vec = policy.decide(4, beta, g)
        scalars = [policy.decide(4, float(bb), float(gg)) for bb, gg in zip(beta, g)]
        np.testing.assert_allclose(vec, scalars, atol=5e-9)

    def test_moments_free_of_table(self, flagship):
        """Solving with a spec string convenience produces a working policy."""
        from bitsched import solve_for

        tab = solve_for("degenerate:g0=2", b_max=4.0, T=2, grid_points=129, quad_nodes=8)
        assert tab.decide(2, 4.0, 2.0) == pytest.approx(2.0, abs=1e-6)
