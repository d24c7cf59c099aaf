"""Monte Carlo experiment harness and real-data bootstrap.

Four simulation experiments (subsample sweep, scalability, double
robustness, overlap gradient) share one cell/replicate engine: replicate b
of a cell draws its dataset with a seed derived from (base seed, scenario,
b), so cells that differ only in n, r, the overlap multiplier or the learner
specification consume coupled draws (paired comparisons), methods run paired
on the same dataset with method-tagged internal seeds, and failures are
recorded per replicate without aborting the sweep. Statistical outputs are
written as tidy CSVs that are byte-identical across reruns; wall-clock
timings go to a separate timings CSV, and a JSON manifest records the
experiment parameters, seeds and code version.
"""

import hashlib
import json
import math
import subprocess
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path

import numpy as np
import pandas as pd

from .dgp import DgpSpec, THETA0, simulate
from .dml import (SeedBundle, estimate_full, estimate_ud, estimate_uniform,
                  normal_quantile)
from .errors import InvalidInputError
from .nuisance import BoostingParams, NuisanceConfig

EXPERIMENTS = ("subsample_sweep", "scalability", "double_robust",
               "overlap_gradient")

MISSPEC_GRID = (
    ("correct", "correct", "boosted_trees", "boosted_trees"),
    ("correct", "wrong", "boosted_trees", "logistic_on_x5"),
    ("wrong", "correct", "linear_on_x5", "boosted_trees"),
    ("wrong", "wrong", "linear_on_x5", "logistic_on_x5"),
)

MANIFEST_FORMAT_VERSION = 1

_REPLICATE_COLUMNS = [
    "experiment", "scenario", "n", "r", "overlap_c", "outcome_spec",
    "propensity_spec", "method", "b", "ok", "theta_hat", "error",
    "ci_low", "ci_high", "ci_width", "covered", "failure",
]
_TIMING_COLUMNS = [
    "experiment", "scenario", "n", "r", "overlap_c", "outcome_spec",
    "propensity_spec", "method", "b", "wall_time_subsample",
    "wall_time_estimate",
]


@dataclass(frozen=True)
class ExperimentSpec:
    experiment: str
    scenarios: tuple = ("OBS1", "OBS2", "OBS3")
    n_grid: tuple = (100_000,)
    r_grid: tuple = (5000,)
    c_grid: tuple = (0.1, 0.3, 0.5, 0.7, 1.0, 1.5)
    misspec_grid: tuple = MISSPEC_GRID
    B: int = 100
    methods: tuple = ("UD", "UNIF")
    base_seed: int = 0
    output_dir: str = None
    K: int = 2
    rho0: float = 0.85
    B_gamma: int = 30
    alpha: float = 0.05
    workers: int = 1
    cache_dir: str = None

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise InvalidInputError(f"unknown experiment {self.experiment!r}")
        if self.B < 1:
            raise InvalidInputError("replication count B must be >= 1")
        if not self.methods:
            raise InvalidInputError("need at least one method")
        for grid, name in ((self.scenarios, "scenarios"),
                           (self.n_grid, "n_grid"), (self.r_grid, "r_grid")):
            if len(grid) == 0:
                raise InvalidInputError(f"{name} must be nonempty")


def derive_seed(*parts):
    """Stable 63-bit seed from arbitrary hashable parts."""
    digest = hashlib.blake2b(repr(parts).encode(), digest_size=8).digest()
    return int.from_bytes(digest, "little") >> 1


def _data_seed(base_seed, cell, b):
    """Replicate data seed: shared across cells that differ only in n, r,
    the overlap multiplier, or the learner specification.

    The simulators draw from per-column substreams, so a larger n extends the
    same dataset and a different overlap multiplier rescales the same draws;
    cross-cell comparisons (r curves, n scaling, overlap gradient, misspec
    grid) are therefore paired, and adding methods or cells never perturbs
    existing draws.
    """
    return base_seed ^ derive_seed("data", cell["scenario"], b)


def _cells(spec):
    """Grid cells of an experiment; each is a dict of cell keys."""
    cells = []
    if spec.experiment == "subsample_sweep":
        for scenario in spec.scenarios:
            for n in spec.n_grid:
                for r in spec.r_grid:
                    cells.append({"scenario": scenario, "n": n, "r": r})
    elif spec.experiment == "scalability":
        for scenario in spec.scenarios:
            for n in spec.n_grid:
                for r in spec.r_grid:
                    cells.append({"scenario": scenario, "n": n, "r": r})
    elif spec.experiment == "double_robust":
        n = spec.n_grid[0]
        r = spec.r_grid[0]
        for scenario in spec.scenarios:
            for m_spec, e_spec, outcome, propensity in spec.misspec_grid:
                cells.append({"scenario": scenario, "n": n, "r": r,
                              "outcome_spec": m_spec,
                              "propensity_spec": e_spec,
                              "outcome_learner": outcome,
                              "propensity_learner": propensity})
    else:  # overlap_gradient
        n = spec.n_grid[0]
        r = spec.r_grid[0]
        for c in spec.c_grid:
            cells.append({"scenario": "OBS3_overlap", "n": n, "r": r,
                          "overlap_c": float(c)})
    return cells


def _nuisance_config(cell):
    return NuisanceConfig(
        outcome_learner=cell.get("outcome_learner", "boosted_trees"),
        propensity_learner=cell.get("propensity_learner", "boosted_trees"),
        boosting=BoostingParams(),
    )


def _run_methods(dataset, cell, methods, data_seed, spec_dict):
    """Run the requested methods on one simulated dataset; never raises."""
    config = _nuisance_config(cell)
    r = cell["r"]
    records = []
    for method in methods:
        base = {k: cell.get(k) for k in ("scenario", "n", "r", "overlap_c",
                                         "outcome_spec", "propensity_spec")}
        base.update(method=method, b=data_seed["b"],
                    experiment=spec_dict["experiment"])
        try:
            if method == "UD":
                seeds = SeedBundle(
                    design=derive_seed(spec_dict["base_seed"], "design"),
                    folds=derive_seed(data_seed["value"], "UD", "folds"))
                report = estimate_ud(
                    dataset, r_p=r // 2, rho0=spec_dict["rho0"],
                    B_gamma=spec_dict["B_gamma"], K=spec_dict["K"],
                    config=config, seeds=seeds, alpha=spec_dict["alpha"],
                    cache_dir=spec_dict["cache_dir"])
            elif method == "UNIF":
                seeds = SeedBundle(
                    design=derive_seed(data_seed["value"], "UNIF", "draw"),
                    folds=derive_seed(data_seed["value"], "UNIF", "folds"))
                report = estimate_uniform(dataset, r, spec_dict["K"], config,
                                          seeds, alpha=spec_dict["alpha"])
            elif method == "FULL":
                report = estimate_full(
                    dataset, spec_dict["K"], config,
                    derive_seed(data_seed["value"], "FULL", "folds"),
                    alpha=spec_dict["alpha"])
            else:
                raise InvalidInputError(f"unknown method {method!r}")
        except Exception as exc:  # per-replicate failure policy: record, go on
            records.append({**base, "ok": False, "theta_hat": np.nan,
                            "error": np.nan, "ci_low": np.nan,
                            "ci_high": np.nan, "ci_width": np.nan,
                            "covered": np.nan, "failure": f"{type(exc).__name__}: {exc}",
                            "wall_time_subsample": np.nan,
                            "wall_time_estimate": np.nan})
            continue
        records.append({
            **base, "ok": True,
            "theta_hat": report.theta_hat,
            "error": report.theta_hat - THETA0,
            "ci_low": report.ci_low,
            "ci_high": report.ci_high,
            "ci_width": report.ci_high - report.ci_low,
            "covered": float(report.ci_low <= THETA0 <= report.ci_high),
            "failure": "",
            "wall_time_subsample": report.wall_time_subsample,
            "wall_time_estimate": report.wall_time_estimate,
        })
    return records


def _replicate_worker(payload):
    cell, b, methods, spec_dict = payload
    data_seed_value = _data_seed(spec_dict["base_seed"], cell, b)
    dgp = DgpSpec(scenario=cell["scenario"], n=cell["n"],
                  overlap_c=cell.get("overlap_c", 1.0))
    dataset = simulate(dgp, data_seed_value)
    return _run_methods(dataset, cell, methods,
                        {"value": data_seed_value, "b": b}, spec_dict)


def _spec_dict(spec):
    return {"experiment": spec.experiment, "base_seed": spec.base_seed,
            "K": spec.K, "rho0": spec.rho0, "B_gamma": spec.B_gamma,
            "alpha": spec.alpha, "cache_dir": spec.cache_dir}


def git_describe():
    try:
        out = subprocess.run(["git", "describe", "--always", "--dirty"],
                             capture_output=True, text=True, timeout=10)
        if out.returncode == 0:
            return out.stdout.strip()
    except OSError:
        pass
    return "unknown"


def summarize_records(records):
    """Aggregate replicate records into one row per cell and method."""
    frame = pd.DataFrame.from_records(records)
    keys = ["experiment", "scenario", "n", "r", "overlap_c", "outcome_spec",
            "propensity_spec", "method"]
    keys = [k for k in keys if k in frame.columns and frame[k].notna().any()]
    rows = []
    for group_key, group in frame.groupby(keys, dropna=False, sort=True):
        ok = group[group["ok"]]
        row = dict(zip(keys, group_key if isinstance(group_key, tuple)
                       else (group_key,)))
        row["n_reps"] = len(group)
        row["n_fail"] = int((~group["ok"]).sum())
        if len(ok):
            row["rmse"] = float(np.sqrt(np.mean(ok["error"].to_numpy() ** 2)))
            row["coverage"] = float(ok["covered"].mean())
            row["ci_width"] = float(ok["ci_width"].mean())
            row["theta_mean"] = float(ok["theta_hat"].mean())
            row["runtime_mean_s"] = float(
                (ok["wall_time_subsample"] + ok["wall_time_estimate"]).mean())
        else:
            row.update(rmse=np.nan, coverage=np.nan, ci_width=np.nan,
                       theta_mean=np.nan, runtime_mean_s=np.nan)
        rows.append(row)
    return pd.DataFrame(rows)


def run_experiment(spec):
    """Run all cells of an experiment; returns the summary table.

    With an output directory set, writes `<experiment>_replicates.csv` and
    `<experiment>_summary.csv` (deterministic bytes), a timings CSV, and a
    JSON manifest.
    """
    spec_dict = _spec_dict(spec)
    cells = _cells(spec)
    out_dir = Path(spec.output_dir) if spec.output_dir else None
    rep_path = None
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)
        rep_path = out_dir / f"{spec.experiment}_replicates.csv"
        rep_path.unlink(missing_ok=True)
    all_records = []
    started = time.perf_counter()
    first_write = True
    for cell in cells:
        payloads = [(cell, b, spec.methods, spec_dict) for b in range(spec.B)]
        if spec.workers > 1:
            with ProcessPoolExecutor(max_workers=spec.workers) as pool:
                batches = list(pool.map(_replicate_worker, payloads))
        else:
            batches = [_replicate_worker(p) for p in payloads]
        cell_records = [rec for batch in batches for rec in batch]
        cell_records.sort(key=lambda rec: (rec["b"], rec["method"]))
        all_records.extend(cell_records)
        if rep_path is not None:
            frame = pd.DataFrame.from_records(cell_records)
            for col in _REPLICATE_COLUMNS:
                if col not in frame.columns:
                    frame[col] = np.nan
            frame[_REPLICATE_COLUMNS].to_csv(
                rep_path, mode="a", header=first_write, index=False,
                float_format="%.17g")
            first_write = False
    summary = summarize_records(all_records)
    if out_dir is not None:
        summary_cols = [c for c in summary.columns if c != "runtime_mean_s"]
        summary[summary_cols].to_csv(out_dir / f"{spec.experiment}_summary.csv",
                                     index=False, float_format="%.17g")
        timings = pd.DataFrame.from_records(all_records)
        for col in _TIMING_COLUMNS:
            if col not in timings.columns:
                timings[col] = np.nan
        timings[_TIMING_COLUMNS].to_csv(
            out_dir / f"{spec.experiment}_timings.csv", index=False)
        manifest = {
            "format_version": MANIFEST_FORMAT_VERSION,
            "experiment": spec.experiment,
            "scenarios": list(spec.scenarios),
            "n_grid": list(spec.n_grid),
            "r_grid": list(spec.r_grid),
            "c_grid": list(spec.c_grid),
            "misspec_grid": [list(m) for m in spec.misspec_grid],
            "B": spec.B,
            "methods": list(spec.methods),
            "base_seed": spec.base_seed,
            "K": spec.K,
            "rho0": spec.rho0,
            "B_gamma": spec.B_gamma,
            "alpha": spec.alpha,
            "workers": spec.workers,
            "git_describe": git_describe(),
            "created_utc": datetime.now(timezone.utc).isoformat(),
            "wall_time_s": time.perf_counter() - started,
        }
        (out_dir / f"{spec.experiment}_manifest.json").write_text(
            json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return summary


def normality_diagnostics(estimates, truth=THETA0):
    """Standardised estimates, QQ pairs and Kolmogorov distance to N(0,1)."""
    estimates = np.asarray(estimates, dtype=np.float64)
    B = estimates.shape[0]
    if B < 30:
        raise InvalidInputError(f"need at least 30 estimates, got {B}")
    sd = estimates.std(ddof=1)
    if sd == 0.0:
        raise InvalidInputError("estimates have zero sample sd")
    standardized = (estimates - estimates.mean()) / sd
    ordered = np.sort(standardized)
    probs = (np.arange(1, B + 1) - 0.5) / B
    theoretical = np.array([normal_quantile(p) for p in probs])
    cdf = 0.5 * np.array([math.erfc(-x / math.sqrt(2.0)) for x in ordered])
    upper = np.arange(1, B + 1) / B - cdf
    lower = cdf - np.arange(0, B) / B
    ks = float(np.max(np.maximum(upper, lower)))
    qq_pairs = np.column_stack((theoretical, ordered))
    return {"standardized": standardized, "qq_pairs": qq_pairs,
            "ks_distance": ks}


def bootstrap_real(data, r, B, methods=("UD", "UNIF"), K=5, base_seed=0,
                   config=None, rho0=0.85, B_gamma=30, alpha=0.05,
                   cache_dir=None, workers=1, output_dir=None):
    """Paired nonparametric bootstrap of subsample estimators on fixed data.

    Each replicate resamples n rows with replacement (one shared draw per
    replicate, so method comparisons are paired) and re-runs the requested
    subsample methods; the full-data estimate on the original rows is the
    reference. Replicates whose resample has fewer than r/2 rows in either
    arm are recorded as failed.
    """
    if config is None:
        config = NuisanceConfig()
    full_report = estimate_full(data, K, config,
                                derive_seed(base_seed, "FULL", "folds"),
                                alpha=alpha)
    payloads = [(b, r, methods, K, base_seed, config, rho0, B_gamma, alpha,
                 cache_dir, data) for b in range(B)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            batches = list(pool.map(_bootstrap_worker, payloads))
    else:
        batches = [_bootstrap_worker(p) for p in payloads]
    records = [rec for batch in batches for rec in batch]
    records.sort(key=lambda rec: (rec["b"], rec["method"]))
    frame = pd.DataFrame.from_records(records)
    rows = []
    for method, group in frame.groupby("method", sort=True):
        ok = group[group["ok"]]
        theta = ok["theta_hat"].to_numpy()
        rows.append({
            "method": method,
            "n_reps": len(group),
            "n_fail": int((~group["ok"]).sum()),
            "theta_mean": float(theta.mean()) if len(theta) else np.nan,
            "mc_sd": float(theta.std(ddof=1)) if len(theta) > 1 else np.nan,
            "rmse_to_full": float(np.sqrt(np.mean(
                (theta - full_report.theta_hat) ** 2))) if len(theta) else np.nan,
            "full_reference": full_report.theta_hat,
        })
    summary = pd.DataFrame(rows)
    if output_dir is not None:
        out_dir = Path(output_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        frame.to_csv(out_dir / "bootstrap_replicates.csv", index=False,
                     float_format="%.17g")
        summary.to_csv(out_dir / "bootstrap_summary.csv", index=False,
                       float_format="%.17g")
    return frame, summary, full_report


def _bootstrap_worker(payload):
    (b, r, methods, K, base_seed, config, rho0, B_gamma, alpha, cache_dir,
     data) = payload
    rng = np.random.Generator(np.random.Philox(
        np.random.SeedSequence(derive_seed(base_seed, "boot", b))))
    n = data.n
    rows = rng.integers(0, n, size=n)
    sample = data.take(rows)
    records = []
    n1 = int((sample.W == 1).sum())
    n0 = n - n1
    for method in methods:
        base = {"b": b, "method": method, "r": r}
        if min(n0, n1) < r // 2:
            records.append({**base, "ok": False, "theta_hat": np.nan,
                            "variance": np.nan, "ci_low": np.nan,
                            "ci_high": np.nan,
                            "failure": "arm starvation in resample"})
            continue
        try:
            if method == "UD":
                seeds = SeedBundle(
                    design=derive_seed(base_seed, "design"),
                    folds=derive_seed(base_seed, "UD", "folds", b))
                report = estimate_ud(sample, r_p=r // 2, rho0=rho0,
                                     B_gamma=B_gamma, K=K, config=config,
                                     seeds=seeds, alpha=alpha,
                                     cache_dir=cache_dir)
            elif method == "UNIF":
                seeds = SeedBundle(
                    design=derive_seed(base_seed, "UNIF", "draw", b),
                    folds=derive_seed(base_seed, "UNIF", "folds", b))
                report = estimate_uniform(sample, r, K, config, seeds,
                                          alpha=alpha)
            else:
                raise InvalidInputError(f"unknown bootstrap method {method!r}")
        except Exception as exc:
            records.append({**base, "ok": False, "theta_hat": np.nan,
                            "variance": np.nan, "ci_low": np.nan,
                            "ci_high": np.nan,
                            "failure": f"{type(exc).__name__}: {exc}"})
            continue
        records.append({**base, "ok": True, "theta_hat": report.theta_hat,
                        "variance": report.variance, "ci_low": report.ci_low,
                        "ci_high": report.ci_high, "failure": ""})
    return records
