import csv
import io
import math

import numpy as np
import pytest
from scipy import stats

from sumtest.dist import binomial_half_entropy
from sumtest.measure import IntervalSet, Prior
from sumtest.policies import Bisection, Greedy, SequentialBifurcation
from sumtest.sim import (
    SimConfig,
    answer,
    normality_stats,
    rate_estimate,
    run,
    sample_theta,
    worker_count,
    write_summary,
    write_trajectories,
)

from conftest import random_interval_set


class TestSampling:
    def test_uniform_range(self, uniform):
        t = sample_theta(uniform, 1000, np.random.default_rng(0))
        assert np.all((t > 0) & (t <= 1))

    def test_ks_against_cdf(self, step_prior):
        t = sample_theta(step_prior, 100_000, np.random.default_rng(1))
        assert stats.kstest(t, step_prior.cdf).statistic < 0.01

    def test_single_cell_prior(self):
        p = Prior([0, 1, 2, 3], [0, 1, 0])
        t = sample_theta(p, 1000, np.random.default_rng(2))
        assert np.all((t > 1) & (t <= 2))


class TestAnswer:
    def test_examples(self):
        assert answer([0.3, 0.6], IntervalSet([(0.5, 1)])) == 1
        assert answer([0.3, 0.6], IntervalSet.empty()) == 0
        assert answer([0.3, 0.6], IntervalSet([(0, 1)])) == 2

    def test_matches_membership(self):
        rng = np.random.default_rng(3)
        for _ in range(200):
            q = random_interval_set(rng, lo=0, hi=1)
            theta = rng.random(5)
            brute = sum(any(a < t <= b for a, b in q) for t in theta)
            assert answer(theta, q) == brute


class TestRun:
    def test_single_object_is_deterministic(self, uniform):
        for t in run(SimConfig(uniform, 1, 10, replications=5, master_seed=4)):
            np.testing.assert_array_equal(t.entropies, -np.arange(11.0))

    def test_closed_form_matches_exact_posterior(self, uniform, step_prior):
        for prior in (uniform, step_prior):
            for t in run(SimConfig(prior, 2, 10, replications=10, master_seed=5, exact=True)):
                np.testing.assert_allclose(t.entropies, t.exact_entropies, atol=1e-9)
                if prior is uniform:
                    closed = -(10 * 2 - sum(math.log2(math.comb(2, int(x))) for x in t.answers))
                    assert t.final_entropy == pytest.approx(closed, abs=1e-9)

    def test_answers_agree_with_recorded_locations(self, step_prior):
        from sumtest.policies import dyadic_question

        for t in run(SimConfig(step_prior, 3, 12, replications=20, master_seed=6)):
            for n in range(1, 13):
                assert answer(t.theta, dyadic_question(step_prior, n)) == t.answers[n - 1]

    def test_reproducible(self, uniform):
        cfg = SimConfig(uniform, 2, 8, replications=2, master_seed=7)
        a, b = run(cfg), run(cfg)
        for x, y in zip(a, b):
            np.testing.assert_array_equal(x.answers, y.answers)
            np.testing.assert_array_equal(x.entropies, y.entropies)

    def test_parallel_matches_serial(self, uniform):
        cfg = SimConfig(uniform, 2, 8, replications=6, master_seed=8)
        serial, parallel = run(cfg, workers=1), run(cfg, workers=2)
        assert [t.rep for t in parallel] == list(range(6))
        for x, y in zip(serial, parallel):
            np.testing.assert_array_equal(x.answers, y.answers)

    def test_dyadic_answers_are_binomial(self, uniform):
        trajs = run(SimConfig(uniform, 3, 1, replications=10_000, master_seed=9))
        counts = np.bincount([int(t.answers[0]) for t in trajs], minlength=4)
        expected = 10_000 * np.array([1, 3, 3, 1]) / 8
        assert stats.chisquare(counts, expected).pvalue > 0.001

    def test_mean_entropy_step(self, uniform):
        trajs = run(SimConfig(uniform, 2, 5, replications=4000, master_seed=10))
        steps = np.concatenate([np.diff(t.entropies) for t in trajs])
        se = steps.std(ddof=1) / math.sqrt(steps.size)
        assert abs(steps.mean() + 1.5) <= 3 * se

    def test_greedy_dominates_per_step(self, uniform):
        trajs = run(SimConfig(uniform, 2, 4, Greedy(), replications=20, master_seed=11))
        for t in trajs:
            assert np.all(t.predictive_entropies >= 1.5 - 1e-9)
            assert t.entropies[0] == 0.0

    def test_sb_trajectory(self, uniform):
        t = run(SimConfig(uniform, 2, 200, SequentialBifurcation(6), replications=1, master_seed=12))[0]
        assert t.final_entropy <= -12 + 1e-9
        assert t.predictive_entropies[0] == 1.5

    def test_config_validation(self, uniform):
        for bad in (dict(k=0), dict(N=0), dict(replications=0), dict(master_seed=-1)):
            with pytest.raises(ValueError):
                SimConfig(uniform, **{"k": 1, "N": 1, **bad})
        with pytest.raises(ValueError):
            SimConfig(uniform, 1, 1, Bisection())

    def test_worker_count_env(self, monkeypatch):
        monkeypatch.setenv("SUMTEST_THREADS", "3")
        assert worker_count() == 3
        monkeypatch.setenv("SUMTEST_THREADS", "x")
        with pytest.raises(ValueError):
            worker_count()


class TestStatistics:
    def test_rate(self, uniform):
        trajs = run(SimConfig(uniform, 2, 20, replications=2000, master_seed=13))
        assert rate_estimate(trajs, "predictive") == 1.5
        rates = [t.rate for t in trajs]
        assert abs(rate_estimate(trajs) - 1.5) <= 3 * np.std(rates, ddof=1) / math.sqrt(len(rates))
        with pytest.raises(ValueError):
            rate_estimate(trajs, "other")

    def test_single_object_statistic_vanishes(self, uniform):
        ns = normality_stats(run(SimConfig(uniform, 1, 20, replications=10, master_seed=14)), 1, 20)
        np.testing.assert_array_equal(ns.statistic, 0.0)

    def test_variance_k2(self, uniform):
        ns = normality_stats(run(SimConfig(uniform, 2, 100, replications=2000, master_seed=15)), 2, 100)
        assert ns.sigma2 == 0.25
        assert abs(ns.var_ratio - 1) < 0.15

    def test_nonuniform_prior_uses_i2(self, step_prior):
        trajs = run(SimConfig(step_prior, 2, 30, replications=500, master_seed=16))
        ns = normality_stats(trajs, 2, 30)
        assert abs(ns.mean_dev) < 0.2
        assert all(t.i2[0] == pytest.approx(2 * step_prior.entropy_bits) for t in trajs[:3])


class TestCsv:
    def test_trajectory_and_summary(self, uniform, tmp_path):
        trajs = run(SimConfig(uniform, 2, 3, replications=2, master_seed=17))
        write_trajectories(tmp_path / "t.csv", trajs)
        rows = list(csv.reader(open(tmp_path / "t.csv")))
        assert rows[0] == ["rep", "n", "X_n", "H_bits"]
        assert len(rows) == 1 + 2 * 4
        assert rows[1] == ["0", "0", "", "0"]
        buf = io.StringIO()
        write_summary(buf, trajs)
        lines = buf.getvalue().splitlines()
        assert lines[0] == "rep,final_entropy,rate"
        assert float(lines[1].split(",")[1]) == trajs[0].final_entropy

    def test_full_precision(self, step_prior, tmp_path):
        trajs = run(SimConfig(step_prior, 2, 3, replications=1, master_seed=18))
        write_trajectories(tmp_path / "t.csv", trajs)
        rows = list(csv.reader(open(tmp_path / "t.csv")))
        assert [float(r[3]) for r in rows[1:]] == trajs[0].entropies.tolist()
