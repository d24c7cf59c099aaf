"""Experiment harness: seeding schedule, aggregation, diagnostics, bootstrap."""

import math

import numpy as np
import pandas as pd
import pytest

from uddml.bench import (ExperimentSpec, bootstrap_real, derive_seed,
                         normality_diagnostics, run_experiment,
                         summarize_records)
from uddml.dgp import Dataset
from uddml.dml import normal_quantile
from uddml.errors import InvalidInputError


def _tiny_spec(tmp_path, **overrides):
    base = dict(experiment="subsample_sweep", scenarios=("OBS1",),
                n_grid=(1200,), r_grid=(200,), B=3, methods=("UD", "UNIF"),
                base_seed=5, output_dir=str(tmp_path), K=2, B_gamma=5,
                cache_dir=str(tmp_path / "cache"))
    base.update(overrides)
    return ExperimentSpec(**base)


@pytest.fixture(scope="module")
def linear_learners():
    # module-level misspec grid entry reused to keep the smoke runs fast
    return (("correct", "correct", "linear", "logistic"),)


def test_spec_validation():
    with pytest.raises(InvalidInputError):
        ExperimentSpec(experiment="nope")
    with pytest.raises(InvalidInputError):
        ExperimentSpec(experiment="scalability", B=0)
    with pytest.raises(InvalidInputError):
        ExperimentSpec(experiment="scalability", scenarios=())


def test_derive_seed_stable_and_distinct():
    assert derive_seed("cell", 3) == derive_seed("cell", 3)
    assert derive_seed("cell", 3) != derive_seed("cell", 4)
    assert derive_seed("a", 0) != derive_seed("b", 0)


def test_degenerate_cell_aggregates_to_zero_rmse():
    records = [{
        "experiment": "subsample_sweep", "scenario": "OBS1", "n": 10, "r": 10,
        "overlap_c": None, "outcome_spec": None, "propensity_spec": None,
        "method": "FULL", "b": 0, "ok": True, "theta_hat": 1.0, "error": 0.0,
        "ci_low": 0.9, "ci_high": 1.1, "ci_width": 0.2, "covered": 1.0,
        "failure": "", "wall_time_subsample": 0.0, "wall_time_estimate": 0.1,
    }]
    summary = summarize_records(records)
    assert summary.loc[0, "rmse"] == 0.0
    assert summary.loc[0, "coverage"] == 1.0
    assert summary.loc[0, "n_fail"] == 0


def test_run_experiment_outputs_and_determinism(tmp_path):
    out_a = tmp_path / "a"
    out_b = tmp_path / "b"
    for out in (out_a, out_b):
        run_experiment(_tiny_spec(out))
    for name in ("subsample_sweep_replicates.csv",
                 "subsample_sweep_summary.csv"):
        assert (out_a / name).read_bytes() == (out_b / name).read_bytes()
    manifest = out_a / "subsample_sweep_manifest.json"
    assert manifest.exists()
    text = manifest.read_text()
    for key in ("base_seed", "git_describe", "B_gamma", "methods"):
        assert key in text


def test_replicate_aggregation_matches_independent_pass(tmp_path):
    spec = _tiny_spec(tmp_path, B=4)
    summary = run_experiment(spec)
    reps = pd.read_csv(tmp_path / "subsample_sweep_replicates.csv")
    for _, row in summary.iterrows():
        sel = reps[(reps["method"] == row["method"]) & reps["ok"]]
        assert row["rmse"] == pytest.approx(
            math.sqrt(np.mean((sel["theta_hat"] - 1.0) ** 2)), abs=1e-12)
        assert row["coverage"] == pytest.approx(
            np.mean((sel["ci_low"] <= 1.0) & (1.0 <= sel["ci_high"])),
            abs=1e-12)
        assert row["ci_width"] == pytest.approx(
            np.mean(sel["ci_high"] - sel["ci_low"]), abs=1e-12)


def test_adding_methods_keeps_existing_draws(tmp_path):
    only_ud = run_experiment(_tiny_spec(tmp_path / "x", methods=("UD",)))
    both = run_experiment(_tiny_spec(tmp_path / "y", methods=("UD", "UNIF")))
    a = only_ud[only_ud["method"] == "UD"].iloc[0]
    b = both[both["method"] == "UD"].iloc[0]
    assert a["rmse"] == b["rmse"]
    assert a["theta_mean"] == b["theta_mean"]


def test_failures_recorded_not_raised(tmp_path):
    # r above n forces a precondition failure in every replicate
    spec = _tiny_spec(tmp_path, n_grid=(300,), r_grid=(310,), B=2)
    summary = run_experiment(spec)
    assert (summary["n_fail"] == 2).all()
    reps = pd.read_csv(tmp_path / "subsample_sweep_replicates.csv")
    failed = reps[~reps["ok"]]
    assert len(failed) == len(reps)
    assert failed["failure"].str.len().gt(0).all()


def test_double_robust_cells_enumerate_grid(tmp_path):
    spec = ExperimentSpec(
        experiment="double_robust", scenarios=("OBS1",), n_grid=(800,),
        r_grid=(200,), B=1, methods=("UNIF",), base_seed=1,
        misspec_grid=(("wrong", "wrong", "linear_on_x5", "logistic_on_x5"),
                      ("correct", "correct", "linear", "logistic")),
        output_dir=str(tmp_path), cache_dir=None)
    summary = run_experiment(spec)
    assert set(zip(summary["outcome_spec"], summary["propensity_spec"])) == {
        ("wrong", "wrong"), ("correct", "correct")}


def test_overlap_cells_carry_multiplier(tmp_path):
    spec = ExperimentSpec(
        experiment="overlap_gradient", scenarios=("OBS3_overlap",),
        n_grid=(900,), r_grid=(150,), c_grid=(0.0, 1.0), B=1,
        methods=("UNIF",), base_seed=2, output_dir=str(tmp_path),
        misspec_grid=(("correct", "correct", "linear", "logistic"),))
    summary = run_experiment(spec)
    assert sorted(summary["overlap_c"]) == [0.0, 1.0]


def test_normality_diagnostics_on_gaussian_sample():
    rng = np.random.default_rng(99)
    draws = rng.standard_normal(500)
    out = normality_diagnostics(draws)
    assert out["ks_distance"] < 0.06
    assert out["qq_pairs"].shape == (500, 2)
    assert np.all(np.diff(out["qq_pairs"][:, 1]) >= 0)


def test_normality_diagnostics_ks_matches_manual():
    rng = np.random.default_rng(7)
    draws = rng.standard_normal(80)
    out = normality_diagnostics(draws)
    z = np.sort((draws - draws.mean()) / draws.std(ddof=1))
    cdf = np.array([0.5 * math.erfc(-v / math.sqrt(2)) for v in z])
    n = z.size
    manual = max(max(abs((i + 1) / n - cdf[i]), abs(cdf[i] - i / n))
                 for i in range(n))
    assert out["ks_distance"] == pytest.approx(manual, abs=1e-15)


def test_normality_diagnostics_rejects_degenerate_input():
    with pytest.raises(InvalidInputError):
        normality_diagnostics(np.ones(100))
    with pytest.raises(InvalidInputError):
        normality_diagnostics(np.arange(10.0))


def test_normality_diagnostics_quantile_grid_near_diagonal():
    # the sample sd of the exact quantile grid is 1 - O(1/B), so the diagonal
    # holds to that scale, not to machine precision
    B = 500
    grid = np.array([normal_quantile((i - 0.5) / B) for i in range(1, B + 1)])
    out = normality_diagnostics(grid)
    gap = np.abs(out["qq_pairs"][:, 0] - out["qq_pairs"][:, 1])
    assert gap.max() < 3.5 * abs(1.0 - 1.0 / grid.std(ddof=1))


def _balanced_dataset(n, seed):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, 10))
    e = 1.0 / (1.0 + np.exp(-(0.3 * X[:, 0])))
    W = (rng.random(n) < e).astype(int)
    Y = X[:, 0] + W * 1.0 + rng.normal(size=n)
    return Dataset(Y=Y, W=W, X=X)


def test_bootstrap_real_paired_and_deterministic(tmp_path):
    data = _balanced_dataset(1200, 0)
    frames = []
    for _ in range(2):
        frame, summary, full = bootstrap_real(
            data, r=300, B=3, methods=("UD", "UNIF"), K=2, base_seed=3,
            cache_dir=str(tmp_path / "cache"))
        frames.append(frame)
        assert set(summary["method"]) == {"UD", "UNIF"}
        assert full.method_tag == "FULL"
    pd.testing.assert_frame_equal(frames[0], frames[1])


def test_bootstrap_real_sanity_against_full(tmp_path):
    data = _balanced_dataset(1200, 1)
    frame, summary, full = bootstrap_real(
        data, r=600, B=1, methods=("UD",), K=2, base_seed=4,
        cache_dir=str(tmp_path / "cache"))
    rep = frame[frame["ok"]]
    assert len(rep) == 1
    # paired-run oracle: both estimate the same estimand
    combined_se = math.sqrt(rep["variance"].iloc[0] + full.variance)
    assert abs(rep["theta_hat"].iloc[0] - full.theta_hat) < 4 * combined_se


def test_bootstrap_real_records_arm_starvation(tmp_path):
    rng = np.random.default_rng(5)
    n = 400
    X = rng.normal(size=(n, 10))
    W = np.zeros(n, dtype=int)
    W[:30] = 1   # 7.5% treated; r/2 = 150 can never be reached
    data = Dataset(Y=rng.normal(size=n), W=W, X=X)
    frame, summary, _ = bootstrap_real(data, r=300, B=2, methods=("UD",),
                                       K=2, base_seed=6)
    assert (~frame["ok"]).all()
    assert summary.loc[0, "n_fail"] == 2
