"""Tests for the self-normalized statistic, the test, and the CI inversion."""

import numpy as np
import pytest

from corrt.errors import DataError, DegenerateStatisticError
from corrt.inference import confidence_interval, statistic
from corrt.inference import test as corrt_test
from corrt.programs import Dataset


def noise_dataset(rng, n, p, beta_star=0.0):
    X = rng.standard_normal((n, p))
    z = rng.standard_normal(n)
    eps = rng.standard_normal(n)
    y = beta_star * z + eps
    return Dataset(W=np.column_stack([z, X]), y=y, tested_index=0)


class TestStatistic:
    def test_exact_cancellation(self):
        assert statistic([1.0, 1.0], [1.0, -1.0]) == 0.0

    def test_hand_value(self):
        assert np.isclose(statistic([1.0, 0.0, 0.0], [2.0, 5.0, -7.0]), 1.0, rtol=1e-15)

    def test_scale_invariance_each_argument(self):
        rng = np.random.default_rng(0)
        for _ in range(10):
            e = rng.standard_normal(15)
            u = rng.standard_normal(15)
            c, d = rng.random() * 5 + 0.1, rng.random() * 5 + 0.1
            assert np.isclose(statistic(c * e, d * u), statistic(e, u), rtol=1e-12)

    def test_odd_in_each_argument(self):
        rng = np.random.default_rng(1)
        e = rng.standard_normal(12)
        u = rng.standard_normal(12)
        t = statistic(e, u)
        assert np.isclose(statistic(e, -u), -t, rtol=1e-15)
        assert np.isclose(statistic(-e, u), -t, rtol=1e-15)

    def test_disjoint_supports_degenerate(self):
        with pytest.raises(DegenerateStatisticError):
            statistic([1.0, 0.0], [0.0, 1.0])

    def test_zero_vector_degenerate(self):
        with pytest.raises(DegenerateStatisticError):
            statistic([0.0, 0.0, 0.0], [1.0, 2.0, 3.0])

    def test_validation(self):
        with pytest.raises(DataError):
            statistic([1.0, 2.0], [1.0])
        with pytest.raises(DataError):
            statistic([[1.0]], [[1.0]])
        with pytest.raises(DataError):
            statistic([1.0, np.nan], [1.0, 1.0])
        with pytest.raises(DataError):
            statistic([], [])


class TestTest:
    def test_report_invariants(self):
        rng = np.random.default_rng(2)
        data = noise_dataset(rng, 40, 60)
        rep = corrt_test(data, 0.0, 0.05)
        assert rep.reject == (abs(rep.t_stat) > rep.critical_value)
        assert 0.0 <= rep.p_value <= 1.0
        assert rep.denominator > 0
        assert rep.beta0 == 0.0
        for meta in (rep.gamma_fit_meta, rep.theta_fit_meta):
            assert meta.a_hat > 0
            assert all(m >= -1e-7 for m in meta.feasibility_margins)

    def test_alpha_validated(self):
        rng = np.random.default_rng(3)
        data = noise_dataset(rng, 20, 30)
        with pytest.raises(DataError):
            corrt_test(data, 0.0, 0.0)
        with pytest.raises(DataError):
            corrt_test(data, 0.0, 1.0)

    def test_response_rescaling_leaves_abs_statistic(self):
        # Y -> cY with beta0 -> c*beta0 rescales both residual vectors'
        # gamma side by c and leaves the theta side untouched, so the
        # self-normalized value is unchanged up to solver tolerance.
        rng = np.random.default_rng(4)
        data = noise_dataset(rng, 30, 50, beta_star=0.5)
        c = 3.0
        scaled = Dataset(W=data.W, y=c * data.y, tested_index=0)
        r1 = corrt_test(data, 0.2, 0.05)
        r2 = corrt_test(scaled, c * 0.2, 0.05)
        assert np.isclose(abs(r2.t_stat), abs(r1.t_stat), rtol=1e-6)

    def test_smaller_alpha_needs_larger_statistic(self):
        rng = np.random.default_rng(5)
        data = noise_dataset(rng, 30, 45)
        r1 = corrt_test(data, 0.0, 0.10)
        r2 = corrt_test(data, 0.0, 0.01)
        assert r2.critical_value > r1.critical_value
        assert r1.t_stat == r2.t_stat


class TestConfidenceInterval:
    def test_explicit_grid_matches_pointwise_tests(self):
        rng = np.random.default_rng(6)
        data = noise_dataset(rng, 40, 60)
        grid = np.linspace(-0.6, 0.6, 5)
        cs = confidence_interval(data, 0.95, grid=grid)
        refit = np.array([not corrt_test(data, b, 0.05).reject for b in grid])
        assert np.array_equal(cs.accepted, refit)
        assert cs.level == 0.95
        assert np.array_equal(cs.grid, grid)

    def test_hull_and_contiguity_bookkeeping(self):
        rng = np.random.default_rng(7)
        data = noise_dataset(rng, 40, 60)
        cs = confidence_interval(data, 0.95, grid=np.linspace(-0.8, 0.8, 7))
        idx = np.flatnonzero(cs.accepted)
        assert idx.size > 0
        assert cs.hull == (cs.grid[idx[0]], cs.grid[idx[-1]])
        assert cs.contiguous == (idx.size == idx[-1] - idx[0] + 1)
        assert cs.diagnostic is None

    def test_all_rejected_reports_diagnostic(self):
        rng = np.random.default_rng(8)
        data = noise_dataset(rng, 40, 60)
        cs = confidence_interval(data, 0.95, grid=[1e3, 2e3])
        assert not cs.accepted.any()
        assert cs.hull is None
        assert cs.diagnostic == "no coverage on grid"

    def test_auto_grid_covers_truth_on_easy_instance(self):
        rng = np.random.default_rng(9)
        data = noise_dataset(rng, 40, 60, beta_star=0.0)
        cs = confidence_interval(data, 0.95)
        assert cs.grid.size == 201
        assert cs.accepted.any()
        assert cs.hull[0] <= 0.0 <= cs.hull[1]
        # endpoints rejected, so the window was wide enough
        assert not cs.accepted[0] and not cs.accepted[-1]

    def test_level_validated(self):
        rng = np.random.default_rng(10)
        data = noise_dataset(rng, 20, 30)
        with pytest.raises(DataError):
            confidence_interval(data, 0.0, grid=[0.0])
        with pytest.raises(DataError):
            confidence_interval(data, 1.0, grid=[0.0])

    def test_grid_validated(self):
        rng = np.random.default_rng(11)
        data = noise_dataset(rng, 20, 30)
        with pytest.raises(DataError):
            confidence_interval(data, 0.9, grid=[])
        with pytest.raises(DataError):
            confidence_interval(data, 0.9, grid=[0.0, np.inf])
