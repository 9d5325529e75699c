from pathlib import Path

from ..lib.errors import ConfigError, RfitError
from ..lib.simlab import ExperimentReport, run_cutpoint_study, run_mse_study, run_profile, run_se_study, run_timing_bench
from ..lib.splits import SssConfig
from ..lib.utils import atomic_output_dir, layered_config, parse_list
from .fit import TREE_KEYS, forest_params_from, tree_params_from

EXPERIMENT_KEYS = {
    "cutpoint": ("n", "replicates", "a", "c0", "noise_sd", "x_dist", "min_arm", "brent_tol", "brent_max_iter", "seed", "threads"),
    "mse": ("models", "n", "n_test", "replicates", "b", "seed", "threads") + TREE_KEYS,
    "se": ("model", "n", "n_test", "replicates", "b", "seed", "threads") + TREE_KEYS,
    "timing": ("n_grid", "k_grid", "repeats", "a", "min_arm", "brent_tol", "brent_max_iter", "methods", "seed", "threads"),
    "profile": ("n", "c0", "a", "n_cuts", "noise_sd", "x_dist", "seed", "threads"),
}


def add_timing_options(p) -> None:
    p.add_argument("--n-grid", dest="n_grid", default=None, help="Sample sizes (default 50,100,500,1000,2000,10000)")
    p.add_argument("--k-grid", dest="k_grid", default=None, help="Distinct covariate values (default 10,100,500)")
    p.add_argument("--repeats", type=int, default=None, help="Timed runs per cell (default 10)")
    p.add_argument("--a", type=float, default=None, help="SSS shape parameter (default 10)")
    p.add_argument("--min-arm", dest="min_arm", type=int, default=None, help="Minimum rows per cell (default 5)")
    p.add_argument("--brent-tol", dest="brent_tol", type=float, default=None, help="Brent tolerance")
    p.add_argument("--brent-max-iter", dest="brent_max_iter", type=int, default=None, help="Brent iteration cap")
    p.add_argument("--methods", default=None, help="Subset of naive_gs,updating_gs,sss")


def _sss_from(cfg: dict) -> SssConfig:
    return SssConfig(**{k: cfg[k] for k in ("a", "brent_tol", "brent_max_iter") if k in cfg})


def _given(cfg: dict, **converters) -> dict:
    """Keyword arguments for the keys present in ``cfg``, converted; absent keys keep the function defaults."""
    return {name: conv(cfg[key]) for name, (key, conv) in converters.items() if key in cfg}


def run_experiment(name: str, cfg: dict) -> ExperimentReport:
    ints = lambda v: parse_list(v, int)
    floats = lambda v: parse_list(v, float)
    common = _given(cfg, seed=("seed", int))
    if name == "cutpoint":
        return run_cutpoint_study(
            sss=SssConfig(**{k: cfg[k] for k in ("brent_tol", "brent_max_iter") if k in cfg}),
            n_jobs=cfg.get("threads"),
            **common,
            **_given(cfg, n=("n", ints), replicates=("replicates", int), a_grid=("a", floats), c0=("c0", float),
                     noise_sd=("noise_sd", float), x_dist=("x_dist", str), min_arm=("min_arm", int)),
        )
    if name == "mse":
        return run_mse_study(
            forest=forest_params_from(cfg, default_b=500),
            n_jobs=cfg.get("threads"),
            **common,
            **_given(cfg, models=("models", parse_list), n=("n", ints), n_test=("n_test", int), replicates=("replicates", int)),
        )
    if name == "se":
        return run_se_study(
            tree=tree_params_from(cfg),
            n_jobs=cfg.get("threads"),
            **common,
            **_given(cfg, model=("model", str), n=("n", int), n_test=("n_test", int), replicates=("replicates", int), b=("b", int)),
        )
    if name == "timing":
        return run_timing_bench(
            sss=_sss_from(cfg),
            **common,
            **_given(cfg, n_grid=("n_grid", ints), k_grid=("k_grid", ints), repeats=("repeats", int),
                     min_arm=("min_arm", int), methods=("methods", parse_list)),
        )
    if name == "profile":
        return run_profile(
            **common,
            **_given(cfg, n=("n", int), c0=("c0", float), a_grid=("a", floats), n_cuts=("n_cuts", int),
                     noise_sd=("noise_sd", float), x_dist=("x_dist", str)),
        )
    raise ConfigError(f"unknown experiment {name!r}")


def print_summary(report: ExperimentReport) -> None:
    s = report.summary
    if report.experiment == "cutpoint":
        print(f"{'n':>6}  {'method':<10} {'MSE':>10}  {'mean c':>8}  missing")
        for row in s["mse"]:
            label = row["method"] if row["a"] is None else f"SSS a={row['a']:g}"
            mse = "n/a" if row["mse"] is None else f"{row['mse']:.5f}"
            mean = "n/a" if row["mean_cutpoint"] is None else f"{row['mean_cutpoint']:.4f}"
            print(f"{row['n']:>6}  {label:<10} {mse:>10}  {mean:>8}  {row['missing']}")
    elif report.experiment == "mse":
        print(f"{'model':<6} {'n':>5}  {'method':<5} {'mean MSE':>10}  slope")
        for row in s["methods"]:
            slope = "n/a" if row["slope"] is None else f"{row['slope']:.3f}"
            print(f"{row['model']:<6} {row['n']:>5}  {row['method']:<5} {row['mean_mse']:>10.4f}  {slope}")
    elif report.experiment == "se":
        print(f"Median SE/SD ratio:  raw {s['median_ratio_raw']:.3f}  c0 {s['median_ratio_c0']:.3f}  c {s['median_ratio_c']:.3f}")
        print(f"Clamped variances:   c0 {s['clamped_c0']}  c {s['clamped_c']}")
        print(f"Raw SE > corrected SE at every point: {s['raw_exceeds_c_everywhere']}")
    elif report.experiment == "timing":
        methods = report.config["methods"]
        print(f"{'n':>6} {'K':>5}  " + "  ".join(f"{m:>12}" for m in methods))
        for row in report.points:
            print(f"{row['n']:>6} {row['k']:>5}  " + "  ".join(f"{row[m]:>12.6f}" for m in methods))
    elif report.experiment == "profile":
        print(f"argmax Q: {s['argmax_q']}")
        for a, c in s["argmax_sss"].items():
            print(f"argmax surrogate (a={a}): {c:.4f}")


def run(args) -> int:
    """rfit simulate <experiment>: run one experiment and write its report directory."""
    name = args.experiment
    out_dir = Path(args.out or f"report_{name}").expanduser().resolve()
    try:
        cfg = layered_config(args, EXPERIMENT_KEYS[name])
        print(f"Running {name} experiment (seed = {cfg.get('seed', 'default')})")
        report = run_experiment(name, cfg)
        with atomic_output_dir(out_dir) as staging:
            report.write(staging)
    except RfitError as e:
        print(f"ERROR: {e}")
        return 1

    print("\n=== Summary ===")
    print_summary(report)
    print(f"Report written to: {out_dir}")
    return 0
