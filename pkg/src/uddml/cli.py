"""Command-line interface: simulate, estimate, bench, design.

Flag values win over config-file values, which win over the documented
defaults (the same defaults the experiments use: rho0 0.85, search budget 30,
alpha 0.05, K = 2 for simulation benches and 5 for real-data estimation).
Exit codes: 0 success, 2 usage/schema error, 3 statistical precondition
failure, 4 internal error.

Primary outputs (CSV/JSON) are byte-identical across reruns with the same
flags and seed; wall-clock timings are therefore excluded from estimate
reports unless --timings is given, and live in a separate timings CSV for
benches.
"""

import argparse
import json
import os
import sys
from pathlib import Path


from . import bench as bench_mod
from .bench import ExperimentSpec, bootstrap_real, run_experiment
from .design import gefd_sq, skeleton_with_cache
from .dgp import DgpSpec, load_csv, save_csv, simulate
from .dml import (SeedBundle, estimate_full, estimate_on_indices,
                  estimate_uniform, ud_subsample)
from .errors import InvalidInputError, PreconditionError
from .matching import standardized_mean_differences
from .nuisance import (BoostingParams, NuisanceConfig, OUTCOME_LEARNERS,
                       PROPENSITY_LEARNERS)
from .preprocess import rotate

_SCENARIOS = {"obs1": "OBS1", "obs2": "OBS2", "obs3": "OBS3",
              "obs3-overlap": "OBS3_overlap"}
_EXPERIMENTS = {"sweep": "subsample_sweep", "scalability": "scalability",
                "double-robust": "double_robust", "overlap": "overlap_gradient"}


def _load_config(path):
    if path is None:
        return {}
    try:
        cfg = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise InvalidInputError(f"cannot read config file {path}: {exc}")
    if not isinstance(cfg, dict):
        raise InvalidInputError("config file must hold a JSON object")
    return cfg


def _resolve(args, cfg, key, default):
    """flags > config file > default."""
    flag = getattr(args, key, None)
    if flag is not None:
        return flag
    if key in cfg:
        return cfg[key]
    return default


def _cache_dir(args, cfg):
    value = _resolve(args, cfg, "cache_dir", None)
    if value is None:
        value = os.environ.get("UDDML_CACHE_DIR") or None
    return value


def _nuisance_config(args, cfg):
    return NuisanceConfig(
        outcome_learner=_resolve(args, cfg, "outcome_learner", "boosted_trees"),
        propensity_learner=_resolve(args, cfg, "propensity_learner",
                                    "boosted_trees"),
        boosting=BoostingParams(),
    )


def cmd_simulate(args):
    cfg = _load_config(args.config)
    scenario = _SCENARIOS[_resolve(args, cfg, "scenario", "obs1")]
    n = _resolve(args, cfg, "n", 10_000)
    seed = _resolve(args, cfg, "seed", 0)
    c = _resolve(args, cfg, "c", 1.0)
    spec = DgpSpec(scenario=scenario, n=int(n), overlap_c=float(c))
    dataset = simulate(spec, int(seed))
    save_csv(dataset, args.out, include_truth=args.truth)
    print(f"wrote {args.out}: n={dataset.n}, treated fraction "
          f"{dataset.W.mean():.4f}")
    return 0


def _write_json(path, payload):
    text = json.dumps(payload, indent=2, sort_keys=True) + "\n"
    if path is None:
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def cmd_estimate(args):
    cfg = _load_config(args.config)
    dataset = load_csv(args.input)
    method = _resolve(args, cfg, "method", "ud").lower()
    if method not in ("ud", "unif", "full"):
        raise InvalidInputError(f"unknown method {method!r}")
    K = int(_resolve(args, cfg, "K", 5))
    alpha = float(_resolve(args, cfg, "alpha", 0.05))
    seed = int(_resolve(args, cfg, "seed", 0))
    rho0 = float(_resolve(args, cfg, "rho0", 0.85))
    b_gamma = int(_resolve(args, cfg, "b_gamma", 30))
    config = _nuisance_config(args, cfg)
    cache_dir = _cache_dir(args, cfg)

    diagnostics = None
    if method == "ud":
        r_p = _resolve(args, cfg, "rp", None)
        if r_p is None:
            raise InvalidInputError("--rp is required for method ud")
        selection, space, skeleton = ud_subsample(
            dataset, int(r_p), rho0, b_gamma,
            bench_mod.derive_seed(seed, "design"), cache_dir)
        report = estimate_on_indices(
            dataset, selection.indices, K, config,
            bench_mod.derive_seed(seed, "folds"), alpha=alpha, method_tag="UD")
        if args.diagnostics or args.gefd:
            diagnostics = {
                "radius_treated": selection.radius_treated,
                "radius_control": selection.radius_control,
                "smd": standardized_mean_differences(dataset,
                                                     selection).tolist(),
                "treated_indices": selection.treated_indices.tolist(),
                "control_indices": selection.control_indices.tolist(),
                "retained_dimension": space.q,
                "generator": skeleton.generator,
                "discrepancy_sq": skeleton.discrepancy_sq,
            }
            if args.gefd:
                Z = rotate(space, dataset.X)
                diagnostics["gefd_sq"] = gefd_sq(Z[selection.indices], Z, space)
    elif method == "unif":
        r = _resolve(args, cfg, "r", None)
        if r is None:
            raise InvalidInputError("--r is required for method unif")
        seeds = SeedBundle(design=bench_mod.derive_seed(seed, "draw"),
                           folds=bench_mod.derive_seed(seed, "folds"))
        report = estimate_uniform(dataset, int(r), K, config, seeds,
                                  alpha=alpha)
    else:
        report = estimate_full(dataset, K, config,
                               bench_mod.derive_seed(seed, "folds"),
                               alpha=alpha)

    payload = report.to_dict(include_pseudo=args.include_pseudo)
    if not args.timings:
        payload.pop("wall_time_subsample")
        payload.pop("wall_time_estimate")
    if diagnostics:
        payload["diagnostics"] = diagnostics
    _write_json(args.out, payload)
    return 0


def cmd_bench(args):
    cfg = _load_config(args.config)
    seed = int(_resolve(args, cfg, "seed", 0))
    workers = int(_resolve(args, cfg, "workers", 1))
    K_default = 5 if args.experiment == "bootstrap" else 2
    K = int(_resolve(args, cfg, "K", K_default))
    cache_dir = _cache_dir(args, cfg)
    out = _resolve(args, cfg, "out", None)
    if out is None:
        raise InvalidInputError("--out directory is required for bench")
    methods = tuple(m.strip().upper()
                    for m in _resolve(args, cfg, "methods", "ud,unif").split(","))
    B = int(_resolve(args, cfg, "B", 100))

    if args.experiment == "bootstrap":
        if args.input is None:
            raise InvalidInputError("--input CSV is required for bootstrap")
        data = load_csv(args.input)
        r = int(_resolve(args, cfg, "r", 5000))
        _, summary, full_report = bootstrap_real(
            data, r, B, methods=methods, K=K, base_seed=seed,
            config=_nuisance_config(args, cfg), cache_dir=cache_dir,
            workers=workers, output_dir=out)
        print(summary.to_string(index=False))
        print(f"full-data reference: {full_report.theta_hat:.6f}")
        return 0

    scenarios = tuple(_SCENARIOS[s.strip()] for s in
                      _resolve(args, cfg, "scenarios", "obs1,obs2,obs3").split(","))
    n_grid = tuple(int(v) for v in
                   str(_resolve(args, cfg, "n_grid", "100000")).split(","))
    r_grid = tuple(int(v) for v in
                   str(_resolve(args, cfg, "r_grid", "5000")).split(","))
    c_grid = tuple(float(v) for v in
                   str(_resolve(args, cfg, "c_grid",
                                "0.1,0.3,0.5,0.7,1.0,1.5")).split(","))
    spec = ExperimentSpec(
        experiment=_EXPERIMENTS[args.experiment],
        scenarios=scenarios, n_grid=n_grid, r_grid=r_grid, c_grid=c_grid,
        B=B, methods=methods, base_seed=seed, output_dir=out, K=K,
        rho0=float(_resolve(args, cfg, "rho0", 0.85)),
        B_gamma=int(_resolve(args, cfg, "b_gamma", 30)),
        workers=workers, cache_dir=cache_dir)
    summary = run_experiment(spec)
    print(summary.to_string(index=False))
    return 0


def cmd_design(args):
    cfg = _load_config(args.config)
    r_p = int(_resolve(args, cfg, "rp", 100))
    q = int(_resolve(args, cfg, "q", 2))
    budget = int(_resolve(args, cfg, "budget", 30))
    seed = int(_resolve(args, cfg, "seed", 0))
    cache_dir = _cache_dir(args, cfg)
    skeleton, hit = skeleton_with_cache(r_p, q, budget, seed, cache_dir)
    print(f"generator gamma = {skeleton.generator}")
    print(f"squared mixture discrepancy = {skeleton.discrepancy_sq:.17g}")
    print(f"cache: {'hit' if hit else 'miss'}")
    if args.out is not None:
        payload = {
            "r_p": skeleton.r_p,
            "q": skeleton.q,
            "budget": skeleton.search_budget,
            "seed": skeleton.search_seed,
            "generator": skeleton.generator,
            "discrepancy_sq": skeleton.discrepancy_sq,
            "points": [[float(v) for v in row] for row in skeleton.points],
        }
        _write_json(args.out, payload)
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="uddml",
        description="Design-based subsampling + double machine learning")
    sub = parser.add_subparsers(dest="command", required=True)

    p_sim = sub.add_parser("simulate", help="write a simulated dataset CSV")
    p_sim.add_argument("--scenario", choices=sorted(_SCENARIOS),
                       help="DGP scenario (default obs1)")
    p_sim.add_argument("--n", type=int, help="rows to simulate (default 10000)")
    p_sim.add_argument("--seed", type=int, help="RNG seed (default 0)")
    p_sim.add_argument("--c", type=float,
                       help="overlap multiplier for obs3-overlap (default 1.0)")
    p_sim.add_argument("--truth", action="store_true",
                       help="also export true_e0/true_m0/true_m1/true_cate")
    p_sim.add_argument("--out", required=True, help="output CSV path")
    p_sim.add_argument("--config", help="JSON config file")
    p_sim.set_defaults(handler=cmd_simulate)

    p_est = sub.add_parser("estimate", help="estimate the ATE from a CSV")
    p_est.add_argument("--input", required=True,
                       help="CSV with Y,W,X1..Xp columns")
    p_est.add_argument("--method", choices=("ud", "unif", "full"),
                       help="estimator (default ud)")
    p_est.add_argument("--rp", type=int,
                       help="treated/control pairs for method ud")
    p_est.add_argument("--r", type=int, help="subsample size for method unif")
    p_est.add_argument("--rho0", type=float,
                       help="retained-variance threshold (default 0.85)")
    p_est.add_argument("--b-gamma", dest="b_gamma", type=int,
                       help="design search budget (default 30)")
    p_est.add_argument("--K", type=int,
                       help="cross-fitting folds (default 5 for real data)")
    p_est.add_argument("--alpha", type=float,
                       help="interval level (default 0.05)")
    p_est.add_argument("--seed", type=int, help="base seed (default 0)")
    p_est.add_argument("--outcome-learner", dest="outcome_learner",
                       choices=OUTCOME_LEARNERS)
    p_est.add_argument("--propensity-learner", dest="propensity_learner",
                       choices=PROPENSITY_LEARNERS)
    p_est.add_argument("--include-pseudo", action="store_true",
                       help="include pseudo-outcomes and fold labels in JSON")
    p_est.add_argument("--timings", action="store_true",
                       help="include wall times (breaks byte-identity)")
    p_est.add_argument("--diagnostics", action="store_true",
                       help="include SMD balance and matching radii (ud)")
    p_est.add_argument("--gefd", action="store_true",
                       help="also report the exact GEFD (quadratic in n)")
    p_est.add_argument("--cache-dir", dest="cache_dir",
                       help="skeleton cache directory (or UDDML_CACHE_DIR)")
    p_est.add_argument("--out", help="output JSON path (default stdout)")
    p_est.add_argument("--config", help="JSON config file")
    p_est.set_defaults(handler=cmd_estimate)

    p_bench = sub.add_parser("bench", help="run a Monte Carlo experiment")
    p_bench.add_argument("--experiment", required=True,
                         choices=sorted(_EXPERIMENTS) + ["bootstrap"])
    p_bench.add_argument("--scenarios", help="comma list (default obs1,obs2,obs3)")
    p_bench.add_argument("--n-grid", dest="n_grid",
                         help="comma list of n (default 100000)")
    p_bench.add_argument("--r-grid", dest="r_grid",
                         help="comma list of r (default 5000)")
    p_bench.add_argument("--c-grid", dest="c_grid",
                         help="overlap multipliers (default 0.1..1.5)")
    p_bench.add_argument("--B", type=int, help="replications (default 100)")
    p_bench.add_argument("--methods", help="comma list of ud,unif,full")
    p_bench.add_argument("--seed", type=int, help="base seed (default 0)")
    p_bench.add_argument("--K", type=int,
                         help="folds (default 2; bootstrap default 5)")
    p_bench.add_argument("--r", type=int,
                         help="subsample size for bootstrap (default 5000)")
    p_bench.add_argument("--rho0", type=float,
                         help="retained-variance threshold (default 0.85)")
    p_bench.add_argument("--b-gamma", dest="b_gamma", type=int,
                         help="design search budget (default 30)")
    p_bench.add_argument("--input", help="CSV input for bootstrap")
    p_bench.add_argument("--workers", type=int,
                         help="parallel replicate workers (default 1)")
    p_bench.add_argument("--cache-dir", dest="cache_dir")
    p_bench.add_argument("--out", help="output directory")
    p_bench.add_argument("--outcome-learner", dest="outcome_learner",
                         choices=OUTCOME_LEARNERS)
    p_bench.add_argument("--propensity-learner", dest="propensity_learner",
                         choices=PROPENSITY_LEARNERS)
    p_bench.add_argument("--config", help="JSON config file")
    p_bench.set_defaults(handler=cmd_bench)

    p_des = sub.add_parser("design", help="search and inspect a skeleton")
    p_des.add_argument("--rp", type=int, help="design runs r_p")
    p_des.add_argument("--q", type=int, help="design dimension")
    p_des.add_argument("--budget", type=int,
                       help="generator search budget (default 30)")
    p_des.add_argument("--seed", type=int, help="search seed (default 0)")
    p_des.add_argument("--cache-dir", dest="cache_dir")
    p_des.add_argument("--out", help="skeleton JSON output path")
    p_des.add_argument("--config", help="JSON config file")
    p_des.set_defaults(handler=cmd_design)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.handler(args)
    except InvalidInputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except PreconditionError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except Exception as exc:  # pragma: no cover - defensive
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
