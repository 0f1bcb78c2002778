"""Tests for the simulation harness: DGPs, the engine, and exports."""

import csv
import json

import numpy as np
import pytest

from corrt.errors import DataError, HarnessError
from corrt.montecarlo import (
    CSV_COLUMNS,
    DgpSpec,
    generate,
    generate_with_truth,
    power_curve,
    run_mc,
    to_csv,
    to_json,
)
from corrt.stats import RngStream

SMALL = DgpSpec(family="sparse", n=40, p=60, rho=-0.5, s=5)


def record_key(r):
    """All per-rep fields that must be reproducible (wall time is not)."""
    return (r.stream_id, r.t_stat, r.reject, r.a_hat_gamma, r.a_hat_theta,
            r.fallback_gamma, r.fallback_theta, r.error)


class TestDgpSpec:
    def test_validation(self):
        with pytest.raises(DataError):
            DgpSpec(family="other", n=10, p=20, s=3)
        with pytest.raises(DataError):
            DgpSpec(family="sparse", n=10, p=20)  # s missing
        with pytest.raises(DataError):
            DgpSpec(family="sparse", n=10, p=20, s=21)
        with pytest.raises(DataError):
            DgpSpec(family="sparse", n=10, p=20, s=3, amplitude=1.0)
        with pytest.raises(DataError):
            DgpSpec(family="dense", n=10, p=20, amplitude=1.0, rho=0.3)
        with pytest.raises(DataError):
            DgpSpec(family="dense", n=10, p=20)  # amplitude missing
        with pytest.raises(DataError):
            DgpSpec(family="sparse", n=10, p=20, s=3, rho=1.0)

    def test_truth_properties(self):
        spec = DgpSpec(family="sparse", n=100, p=50, s=3, h=4.0)
        assert np.isclose(spec.null_value, 0.2)
        assert np.isclose(spec.tested_coef_truth, 0.2 + 0.4)
        assert spec.tested_index == 2
        dense = DgpSpec(family="dense", n=100, p=50, amplitude=3.0)
        assert dense.null_value == 0.0
        assert dense.tested_index == 0


class TestGenerate:
    def test_sparse_signal_rule(self):
        # Fixed 2/sqrt(n) block on 1-based coordinates 2..4, truncated
        # from the outside in below s=3; uniform fill elsewhere.
        for s, want in [(1, [2]), (2, [1, 2]), (3, [1, 2, 3]),
                        (6, [0, 1, 2, 3, 4, 5])]:
            spec = DgpSpec(family="sparse", n=25, p=9, s=s)
            _, pi = generate_with_truth(spec, RngStream(3, 0))
            assert np.array_equal(np.flatnonzero(pi), want)
            block = [j for j in (1, 2, 3) if j in want]
            assert np.allclose(pi[block], 2.0 / np.sqrt(25))
            rest = [j for j in want if j not in (1, 2, 3)]
            assert np.all(pi[rest] > 0.0)
            assert np.all(pi[rest] < 4.0 / np.sqrt(25))

    def test_h_shifts_tested_coordinate_only(self):
        base = DgpSpec(family="sparse", n=25, p=9, s=4)
        shifted = DgpSpec(family="sparse", n=25, p=9, s=4, h=2.0)
        _, pi0 = generate_with_truth(base, RngStream(5, 1))
        _, pi1 = generate_with_truth(shifted, RngStream(5, 1))
        delta = pi1 - pi0
        assert np.isclose(delta[2], 2.0 / 5.0)
        delta[2] = 0.0
        assert np.all(delta == 0.0)

    def test_dense_rule(self):
        spec = DgpSpec(family="dense", n=36, p=11, amplitude=3.0, h=1.0)
        data, pi = generate_with_truth(spec, RngStream(9, 0))
        assert data.tested_index == 0
        assert np.isclose(pi[0], 1.0 / 6.0)
        assert np.allclose(pi[1:], 3.0 / np.sqrt(10))

    def test_same_stream_same_data(self):
        a = generate(SMALL, RngStream(11, 4))
        b = generate(SMALL, RngStream(11, 4))
        assert np.array_equal(a.W, b.W) and np.array_equal(a.y, b.y)

    def test_response_centered_on_signal(self):
        # E[Y | W] = W pi, so the residual at the truth is the error
        # draw; its mean over replications vanishes componentwise.
        spec = DgpSpec(family="sparse", n=5, p=6, s=3)
        reps = 10_000
        acc = np.zeros(5)
        for k in range(reps):
            data, pi = generate_with_truth(spec, RngStream(123, k))
            acc += data.y - data.W @ pi
        assert np.all(np.abs(acc / reps) <= 4.0 / np.sqrt(reps))

    def test_error_variances(self):
        big_g = DgpSpec(family="sparse", n=100_000, p=3, s=1)
        data, pi = generate_with_truth(big_g, RngStream(2024, 0))
        assert np.isclose((data.y - data.W @ pi).var(), 1.0, rtol=0.05)
        big_t = DgpSpec(family="sparse", n=100_000, p=3, s=1,
                        error="student_t3")
        data, pi = generate_with_truth(big_t, RngStream(2024, 0))
        assert np.isclose((data.y - data.W @ pi).var(), 3.0, rtol=0.05)


class TestRunMc:
    def test_single_rep(self):
        res = run_mc(SMALL, "corrt", 0.05, 1, master_seed=2)
        assert res.rejection_rate in (0.0, 1.0)
        assert len(res.per_rep_records) == 1
        assert res.per_rep_records[0].stream_id == 0
        assert res.mc_stderr == 0.0

    def test_seed_isolation_under_extension(self):
        short = run_mc(SMALL, "corrt", 0.05, 3, master_seed=5)
        long = run_mc(SMALL, "corrt", 0.05, 6, master_seed=5)
        for a, b in zip(short.per_rep_records, long.per_rep_records):
            assert record_key(a) == record_key(b)

    def test_thread_count_invisible(self):
        r1 = run_mc(SMALL, "corrt", 0.05, 4, master_seed=3, threads=1)
        r2 = run_mc(SMALL, "corrt", 0.05, 4, master_seed=3, threads=4)
        assert [record_key(r) for r in r1.per_rep_records] == \
               [record_key(r) for r in r2.per_rep_records]
        assert r1.rejection_rate == r2.rejection_rate

    def test_debias_method(self):
        res = run_mc(SMALL, "debias", 0.05, 3, master_seed=7)
        rec = res.per_rep_records[0]
        assert rec.a_hat_gamma is None and rec.a_hat_theta is None
        assert rec.t_stat is not None

    def test_rate_accounting(self):
        res = run_mc(SMALL, "corrt", 0.05, 5, master_seed=11)
        assert res.rejection_rate == res.rejections / 5
        want_se = np.sqrt(res.rejection_rate * (1 - res.rejection_rate) / 5)
        assert np.isclose(res.mc_stderr, want_se)

    def test_systematic_failure_raises(self):
        # p < n makes the sup-norm residual constraint unsatisfiable, so
        # every replication fails and the failure budget trips.
        bad = DgpSpec(family="sparse", n=40, p=30, s=3)
        with pytest.raises(HarnessError):
            run_mc(bad, "corrt", 0.05, 3, master_seed=1)

    def test_argument_validation(self):
        with pytest.raises(DataError):
            run_mc(SMALL, "score", 0.05, 2, 1)
        with pytest.raises(DataError):
            run_mc(SMALL, "corrt", 0.0, 2, 1)
        with pytest.raises(DataError):
            run_mc(SMALL, "corrt", 0.05, 0, 1)
        with pytest.raises(DataError):
            run_mc(SMALL, "corrt", 0.05, 2, 1, threads=0)


class TestPowerCurve:
    def test_h_zero_matches_run_mc(self):
        curve = power_curve(SMALL, "corrt", 0.05, 4, [0.0, 4.0], 11)
        base = run_mc(SMALL, "corrt", 0.05, 4, 11)
        assert [record_key(r) for r in curve[0].per_rep_records] == \
               [record_key(r) for r in base.per_rep_records]

    def test_theta_fit_shared_within_replication(self):
        curve = power_curve(SMALL, "corrt", 0.05, 3, [0.0, 2.0, 4.0], 11)
        for k in range(3):
            thetas = {res.per_rep_records[k].a_hat_theta for res in curve}
            assert len(thetas) == 1

    def test_shift_increases_rejection(self):
        curve = power_curve(SMALL, "corrt", 0.05, 8, [0.0, 4.0], 11)
        assert curve[1].rejection_rate >= curve[0].rejection_rate

    def test_spec_carries_h(self):
        curve = power_curve(SMALL, "corrt", 0.05, 1, [0.0, 2.0], 4)
        assert [res.spec.h for res in curve] == [0.0, 2.0]

    def test_empty_grid_rejected(self):
        with pytest.raises(DataError):
            power_curve(SMALL, "corrt", 0.05, 2, [], 1)


class TestExport:
    def test_csv_layout(self, tmp_path):
        res = run_mc(SMALL, "corrt", 0.05, 2, master_seed=6)
        path = tmp_path / "cells.csv"
        to_csv([res], path)
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
        assert list(rows[0].keys()) == CSV_COLUMNS
        assert len(rows) == 1
        assert float(rows[0]["rejection_rate"]) == res.rejection_rate
        assert rows[0]["amplitude"] == ""

    def test_json_layout(self, tmp_path):
        res = run_mc(SMALL, "corrt", 0.05, 2, master_seed=6)
        path = tmp_path / "cells.json"
        to_json([res], path, config_echo={"seed": 6, "alpha": 0.05})
        body = json.loads(open(path).read())
        assert body["config"] == {"alpha": 0.05, "seed": 6}
        records = body["results"][0]["records"]
        assert len(records) == 2
        assert "wall_time" not in records[0]
        assert isinstance(records[0]["reject"], bool)

    def test_files_identical_across_threads(self, tmp_path):
        paths = []
        for threads in (1, 4):
            res = run_mc(SMALL, "corrt", 0.05, 3, master_seed=9,
                         threads=threads)
            path = tmp_path / f"t{threads}.json"
            to_json([res], path, config_echo={"seed": 9})
            paths.append(path.read_bytes())
        assert paths[0] == paths[1]
