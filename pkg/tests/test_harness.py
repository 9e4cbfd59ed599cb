import json
import math
from dataclasses import replace

import numpy as np
import pytest
from scipy import stats

from hpyp_lab import harness
from hpyp_lab.errors import ParameterError
from hpyp_lab.harness import (
    ExperimentConfig,
    ExperimentReport,
    kolmogorov_sf,
    ks_one_sample,
    mean_and_se,
    run_experiment,
    z_score,
)
from hpyp_lab.params import TruncationPolicy

FAST = dict(theta=5.0, replicates=200)


def test_mean_se_and_z_definitions():
    x = [1.0, 2.0, 3.0, 4.0]
    est, se = mean_and_se(x)
    assert est == 2.5
    assert se == pytest.approx(math.sqrt(5 / 3) / 2, rel=1e-15)
    assert z_score(2.5, 2.0, se) == pytest.approx(0.5 / se)
    assert z_score(1.0, 1.0, 0.0) == 0.0
    with pytest.raises(ParameterError):
        mean_and_se([1.0])


def test_kolmogorov_series_matches_scipy():
    for x in (0.3, 0.5, 0.8, 1.0, 1.36, 2.0, 3.0):
        assert kolmogorov_sf(x) == pytest.approx(stats.kstwobign.sf(x), rel=1e-10, abs=1e-15)
    assert kolmogorov_sf(0.0) == 1.0


def test_ks_self_test():
    good = 0
    for seed in range(10):
        x = np.random.default_rng(seed).normal(0.0, math.sqrt(2.5), 2000)
        d, p = ks_one_sample(x, 2.5)
        good += p > 0.001
        assert d == pytest.approx(stats.kstest(x, "norm", args=(0, math.sqrt(2.5))).statistic, rel=1e-12)
    assert good >= 9


def test_ks_edge_cases():
    d, p = ks_one_sample(np.full(50, 3.0), 1.0)
    assert d >= 0.5 and p < 1e-6
    with pytest.raises(ParameterError):
        ks_one_sample([], 1.0)
    with pytest.raises(ParameterError):
        ks_one_sample([0.1], 0.0)


def test_config_validation():
    with pytest.raises(ParameterError):
        ExperimentConfig("mean-check", replicates=10)
    with pytest.raises(ParameterError):
        ExperimentConfig("bogus")
    with pytest.raises(ParameterError):
        ExperimentConfig("mean-check", alpha=1.5)
    with pytest.raises(ParameterError):
        ExperimentConfig("clt", time_change="nope")
    with pytest.raises(ParameterError):
        ExperimentConfig.from_dict({"kind": "lln", "colour": "red"})
    with pytest.raises(ParameterError):
        ExperimentConfig.from_dict({"m": 2})
    with pytest.raises(ParameterError):
        ExperimentConfig("mean-check", schema_version=99)


def test_config_round_trip():
    cfg = ExperimentConfig("clt", m=3, L=2, truncation=TruncationPolicy(1e-3, 500, "drop"), master_seed=2**63)
    again = ExperimentConfig.from_dict(json.loads(json.dumps(cfg.to_dict())))
    assert again == cfg


def test_report_round_trip():
    r = run_experiment(ExperimentConfig("mean-check", **FAST))
    data = json.loads(json.dumps(r.to_dict()))
    assert ExperimentReport.from_dict(data) == r
    assert data["pass"] is r.passed


def test_determinism_same_bytes():
    cfg = ExperimentConfig("mean-check", L=2, master_seed=42, **FAST)
    a = json.dumps(run_experiment(cfg).to_dict())
    b = json.dumps(run_experiment(cfg).to_dict())
    assert a == b


def test_replicate_order_does_not_matter():
    cfg = ExperimentConfig("mean-check", master_seed=3, **FAST)
    forward = np.concatenate([harness._homozygosity_block(cfg, a, a + 50)[0] for a in range(0, 200, 50)])
    backward = [harness._homozygosity_block(cfg, a, a + 50)[0] for a in range(150, -1, -50)]
    assert np.array_equal(forward, np.concatenate(backward[::-1]))


def test_parallel_matches_serial(monkeypatch):
    cfg = ExperimentConfig("lln", master_seed=5, **FAST)
    serial = run_experiment(cfg)
    monkeypatch.setenv(harness.THREADS_ENV, "2")
    parallel = run_experiment(cfg)
    assert parallel == serial


def test_bad_thread_setting(monkeypatch):
    monkeypatch.setenv(harness.THREADS_ENV, "many")
    with pytest.raises(ParameterError):
        run_experiment(ExperimentConfig("lln", **FAST))


def test_small_mean_check_reports_finite_z():
    r = run_experiment(ExperimentConfig("mean-check", replicates=100, theta=5.0))
    assert math.isfinite(r.z_score) and r.std_error > 0
    assert r.passed == (abs(r.z_score) <= 4)


def test_lln_small_run_has_finite_se():
    r = run_experiment(ExperimentConfig("lln", replicates=100, theta=50.0))
    assert math.isfinite(r.std_error) and r.std_error > 0
    assert r.details["tolerance"] >= 0.05


def test_capped_draws_force_failure():
    cfg = ExperimentConfig("mean-check", truncation=TruncationPolicy(1e-10, 50), **FAST)
    r = run_experiment(cfg)
    assert r.capped_draws == cfg.replicates and not r.passed and "cap" in r.reason


def test_clt_aborts_on_nonpositive_prediction():
    r = run_experiment(ExperimentConfig("clt", L=2, **FAST))
    assert not r.passed and r.reason.startswith("aborted")
    assert r.estimate is None


def test_clt_reports_all_fields():
    r = run_experiment(ExperimentConfig("clt", theta=50.0, replicates=200))
    assert r.predicted_variance == pytest.approx(3.25)
    assert r.empirical_variance > 0 and 0 <= r.ks_p <= 1 and r.ks_statistic > 0
    assert set(r.details["breakdown"]) == {"sigma2_X", "sigma2_T", "sigma2_1", "delta_term", "cross_term", "total"}


def test_tilted_stable_check():
    r = run_experiment(ExperimentConfig("tilted-stable-check", m=3, beta=0.3, scale_mass=0.5, replicates=20_000))
    assert r.passed
    assert set(r.details["orders"]) == {"1", "2", "3"}


def test_tilted_stable_check_over_budget():
    with pytest.raises(Exception):
        ExperimentConfig("tilted-stable-check", scale_mass=40.0)


def test_runner_kind_mismatch():
    with pytest.raises(ParameterError):
        harness.run_lln(ExperimentConfig("mean-check", **FAST))


def test_clt_trend_helper_shape():
    cfg = ExperimentConfig("clt", theta=20.0, replicates=100)
    base, doubled, moved = harness.clt_trend(cfg)
    assert doubled.config["theta"] == 40.0
    assert moved == (abs(doubled.details["variance_ratio"] - 1) < abs(base.details["variance_ratio"] - 1))
    assert replace(cfg, theta=40.0).theta == 40.0
