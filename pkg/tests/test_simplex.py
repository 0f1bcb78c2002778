from itertools import combinations

import numpy as np
import pytest

from corrt.simplex import LPResult, ParametricLP, solve_at, solve_path


def brute_force_objective(lp, a):
    """Minimum objective over all basic feasible solutions of [A | I].

    Complete oracle for small programs with nonnegative costs (the
    optimum, when the program is feasible, sits at a vertex). Returns
    None when no basis is feasible.
    """
    m, nv = lp.A.shape
    cols = np.column_stack([lp.A, np.eye(m)])
    costs = np.concatenate([lp.c, np.zeros(m)])
    b = lp.rhs(a)
    best = None
    for subset in combinations(range(nv + m), m):
        B = cols[:, subset]
        if abs(np.linalg.det(B)) < 1e-10:
            continue
        xb = np.linalg.solve(B, b)
        if (xb < -1e-9).any():
            continue
        obj = float(costs[list(subset)] @ xb)
        if best is None or obj < best:
            best = obj
    return best


def random_program(rng, nv=None, m=None, nonneg_b1=False):
    nv = nv or rng.integers(2, 5)
    m = m or rng.integers(2, 7)
    c = np.abs(rng.standard_normal(nv))
    A = rng.standard_normal((m, nv))
    b0 = rng.standard_normal(m) * 2.0
    b1 = np.abs(rng.standard_normal(m)) if nonneg_b1 else rng.standard_normal(m)
    return ParametricLP(c=c, A=A, b0=b0, b1=b1)


def assert_optimal_certificates(lp, res):
    b = lp.rhs(res.a)
    assert np.all(res.x >= -1e-9)
    assert np.all(res.slack_margins >= -1e-8 * (1.0 + np.abs(b).max()))
    # Weak duality: y <= 0, y @ A <= c, and a closed gap.
    assert np.all(res.dual <= 1e-7)
    assert np.all(res.dual @ lp.A <= lp.c + 1e-7)
    assert res.dual_gap <= 1e-7 * (1.0 + abs(res.objective))


class TestSolveAt:
    def test_single_variable_lower_bound(self):
        lp = ParametricLP(c=[1.0], A=[[-1.0]], b0=[-1.0], b1=[0.0])
        res = solve_at(lp, 0.0)
        assert res.status == "optimal"
        assert res.x[0] == pytest.approx(1.0, abs=1e-9)
        assert res.objective == pytest.approx(1.0, abs=1e-9)

    def test_symmetric_vertex(self):
        lp = ParametricLP(c=[1.0, 1.0], A=[[-1.0, -1.0]], b0=[-1.0], b1=[0.0])
        res = solve_at(lp, 0.0)
        assert res.status == "optimal"
        assert res.objective == pytest.approx(1.0, abs=1e-9)
        assert min(res.x) == pytest.approx(0.0, abs=1e-9)

    def test_infeasible_with_certificate(self):
        lp = ParametricLP(c=[1.0], A=[[1.0]], b0=[-1.0], b1=[0.0])
        res = solve_at(lp, 0.0)
        assert res.status == "infeasible"
        assert res.infeasibility > 0.5

    def test_unbounded(self):
        lp = ParametricLP(c=[-1.0, 0.0], A=[[1.0, -1.0]], b0=[1.0], b1=[0.0])
        res = solve_at(lp, 0.0)
        assert res.status == "unbounded"

    def test_matches_enumeration_oracle(self):
        """Criterion check: 200 random small programs against brute force."""
        rng = np.random.default_rng(51)
        solved = 0
        for _ in range(200):
            lp = random_program(rng)
            a = float(rng.uniform(-1.0, 1.0))
            res = solve_at(lp, a)
            oracle = brute_force_objective(lp, a)
            if oracle is None:
                assert res.status == "infeasible"
            else:
                assert res.status == "optimal"
                assert res.objective == pytest.approx(oracle, abs=1e-8)
                assert_optimal_certificates(lp, res)
                solved += 1
        assert solved > 100  # the sweep must exercise plenty of optima

    def test_parameter_shifts_rhs(self):
        lp = ParametricLP(c=[1.0], A=[[-1.0]], b0=[-2.0], b1=[1.0])
        assert solve_at(lp, 0.0).objective == pytest.approx(2.0, abs=1e-9)
        assert solve_at(lp, 1.5).objective == pytest.approx(0.5, abs=1e-9)

    def test_validation(self):
        with pytest.raises(ValueError):
            ParametricLP(c=[1.0, 2.0], A=[[1.0]], b0=[1.0], b1=[0.0])
        with pytest.raises(ValueError):
            ParametricLP(c=[np.nan], A=[[1.0]], b0=[1.0], b1=[0.0])
        lp = ParametricLP(c=[1.0], A=[[1.0]], b0=[1.0], b1=[0.0])
        with pytest.raises(ValueError):
            solve_at(lp, np.inf)


class TestSolvePath:
    def test_inactive_parameter_gives_single_interval(self):
        lp = ParametricLP(c=[1.0, 1.0], A=[[-1.0, -1.0]], b0=[-1.0], b1=[0.0])
        path = solve_path(lp, -1.0, 1.0)
        assert path.feasible_range == (-1.0, 1.0)
        assert len(path.segments) == 1
        assert path.objective_at(-0.3) == pytest.approx(1.0, abs=1e-9)
        assert path.objective_at(0.8) == pytest.approx(1.0, abs=1e-9)

    def test_interpolation_matches_fresh_solves(self):
        rng = np.random.default_rng(7)
        checked = 0
        for _ in range(30):
            lp = random_program(rng)
            path = solve_path(lp, -1.0, 1.5)
            if path.feasible_range is None:
                continue
            lo, hi = path.feasible_range
            if hi - lo < 1e-6:
                continue
            for a in rng.uniform(lo, hi, size=20):
                fresh = solve_at(lp, float(a))
                assert fresh.status == "optimal"
                interp = path.objective_at(float(a))
                assert abs(interp - fresh.objective) <= 1e-7 * (1.0 + abs(fresh.objective))
                checked += 1
        assert checked >= 200

    def test_objective_convex_along_path(self):
        rng = np.random.default_rng(19)
        tested = 0
        for _ in range(30):
            lp = random_program(rng)
            path = solve_path(lp, -1.0, 1.0)
            if path.feasible_range is None:
                continue
            lo, hi = path.feasible_range
            if hi - lo < 1e-4:
                continue
            samples = np.sort(rng.uniform(lo, hi, size=9))
            objs = [path.objective_at(float(a)) for a in samples]
            for i, j, k in combinations(range(len(samples)), 3):
                a, b, c = samples[i], samples[j], samples[k]
                lam = (b - a) / (c - a)
                assert objs[j] <= objs[i] + (objs[k] - objs[i]) * lam + 1e-7
            tested += 1
        assert tested >= 10

    def test_feasible_lower_endpoint_matches_bisection(self):
        # x1 >= 1 - a together with x1 <= 0.6 is feasible exactly for a >= 0.4.
        lp = ParametricLP(
            c=[1.0], A=[[-1.0], [1.0]], b0=[-1.0, 0.6], b1=[1.0, 0.0]
        )
        path = solve_path(lp, 0.0, 2.0)
        assert path.feasible_range[0] == pytest.approx(0.4, abs=1e-9)
        assert path.gaps == [(0.0, pytest.approx(0.4, abs=1e-9))]

        # Generic random instances: endpoint agrees with bisection on solve_at.
        rng = np.random.default_rng(23)
        confirmed = 0
        for _ in range(25):
            lp = random_program(rng, nonneg_b1=True)
            path = solve_path(lp, -2.0, 2.0)
            if path.feasible_range is None:
                continue
            lo = path.feasible_range[0]
            if lo <= -2.0 + 1e-9:
                continue
            low, high = -2.0, lo + 1e-3
            assert solve_at(lp, high).status == "optimal"
            for _ in range(60):
                mid = 0.5 * (low + high)
                if solve_at(lp, mid).status == "optimal":
                    high = mid
                else:
                    low = mid
            assert abs(high - lo) <= 1e-6
            confirmed += 1
        assert confirmed >= 5

    def test_monotone_feasibility_for_nonnegative_b1(self):
        rng = np.random.default_rng(31)
        for _ in range(25):
            lp = random_program(rng, nonneg_b1=True)
            path = solve_path(lp, -2.0, 2.0)
            statuses = [
                solve_at(lp, a).status == "optimal" for a in np.linspace(-2, 2, 11)
            ]
            # Once feasible, stays feasible as the parameter grows.
            first = statuses.index(True) if True in statuses else None
            if first is not None:
                assert all(statuses[first:])
            if path.feasible_range is not None:
                assert path.feasible_range[1] == 2.0

    def test_fully_infeasible_window_reported_as_gap(self):
        lp = ParametricLP(c=[1.0], A=[[1.0]], b0=[-5.0], b1=[1.0])
        path = solve_path(lp, -1.0, 1.0)
        assert path.feasible_range is None
        assert path.gaps == [(-1.0, 1.0)]
        assert path.solution_at(0.0).status == "infeasible"

    def test_window_validation(self):
        lp = ParametricLP(c=[1.0], A=[[1.0]], b0=[1.0], b1=[0.0])
        with pytest.raises(ValueError):
            solve_path(lp, 1.0, 1.0)
        path = solve_path(lp, 0.0, 1.0)
        with pytest.raises(ValueError):
            path.solution_at(5.0)

    def test_breakpoints_increase(self):
        rng = np.random.default_rng(41)
        for _ in range(10):
            lp = random_program(rng, nv=4, m=6)
            path = solve_path(lp, -1.0, 1.0)
            bps = path.breakpoints
            assert np.all(np.diff(bps) > 0)


class TestResultShape:
    def test_result_is_frozen(self):
        res = LPResult(status="infeasible", a=0.0)
        with pytest.raises(Exception):
            res.status = "optimal"

    def test_dump_round_trips_dimensions(self):
        lp = ParametricLP(c=[1.0, 2.0], A=[[1.0, 0.0], [0.0, 1.0]], b0=[1.0, 2.0], b1=[0.5, 0.0])
        text = lp.dump()
        assert "min" in text and text.count("<=") == 2
