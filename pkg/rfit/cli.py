import argparse

from . import __version__
from .commands import bench as bench_cmd
from .commands import fit as fit_cmd
from .commands import predict as predict_cmd
from .commands import simulate as simulate_cmd
from .lib.utils import configure_logging


def _add_run_options(p: argparse.ArgumentParser) -> None:
    p.add_argument("--preset", default=None, help="Preset name in presets/ (no extension)")
    p.add_argument("--config", default=None, help="JSON config file; keys mirror the long flag names")
    p.add_argument("--seed", type=int, default=None, help="Seed for all randomness (default 20190101)")
    p.add_argument("--threads", type=int, default=None, help="Worker processes (default: $RFIT_THREADS, else all cores)")


def _add_tree_options(p: argparse.ArgumentParser) -> None:
    p.add_argument("--mtry", type=int, default=None, help="Covariates drawn per node (default max(1, p // 3))")
    p.add_argument("--min-arm", dest="min_arm", type=int, default=None, help="Minimum rows per arm in each child (default 5)")
    p.add_argument("--min-node", dest="min_node", type=int, default=None, help="Smallest node that may split (default 20)")
    p.add_argument("--max-depth", dest="max_depth", type=int, default=None, help="Depth limit (default 30)")
    p.add_argument("--split-method", dest="split_method", choices=["GS", "SSS", "gs", "sss"], default=None, help="Split search (default SSS)")
    p.add_argument("--a", type=float, default=None, help="SSS shape parameter on the standardized scale (default 10)")
    p.add_argument("--brent-tol", dest="brent_tol", type=float, default=None, help="Brent tolerance (default 1e-4)")
    p.add_argument("--brent-max-iter", dest="brent_max_iter", type=int, default=None, help="Brent iteration cap (default 100)")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="rfit", description="Random forests of interaction trees for individualized treatment effects")
    p.add_argument("-v", "--verbose", action="count", default=0, help="More logging (-v info, -vv debug)")
    p.add_argument("--version", action="version", version=f"rfit {__version__}")
    sub = p.add_subparsers(dest="cmd", required=True)

    # fit
    f = sub.add_parser("fit", help="Fit an RFIT forest to a trial CSV and save the model directory")
    f.add_argument("--csv", required=True, help="Trial data CSV")
    f.add_argument("--out", default="model", help="Model directory to write (default ./model)")
    f.add_argument("--schema", default=None, help="Schema JSON (response, treatment, covariates, nominal, id, exclude, on_missing)")
    f.add_argument("--response", default=None, help="Response column")
    f.add_argument("--treatment", default=None, help="Treatment column (values 0/1)")
    f.add_argument("--covariates", default=None, help="Comma-separated covariate columns (default: all other columns)")
    f.add_argument("--nominal", default=None, help="Comma-separated nominal covariates")
    f.add_argument("--id", default=None, help="Row id column (never a covariate)")
    f.add_argument("--exclude", default=None, help="Comma-separated columns to ignore")
    f.add_argument("--on-missing", dest="on_missing", choices=["error", "drop"], default=None, help="Missing cells: error or drop the row")
    f.add_argument("-b", "--trees", dest="b", type=int, default=None, help="Number of bootstrap trees (default 2000)")
    _add_tree_options(f)
    _add_run_options(f)

    # predict
    r = sub.add_parser("predict", help="ITE and jackknife standard errors for the rows of a CSV")
    r.add_argument("--model", required=True, help="Model directory written by fit")
    r.add_argument("--csv", required=True, help="CSV with the model's covariate columns")
    r.add_argument("--out", default="predictions.csv", help="Output CSV (default ./predictions.csv)")
    r.add_argument("--se", choices=["raw", "c0", "c"], default="c", help="Variance behind the se column (default c)")
    r.add_argument("--sort-by-ite", dest="sort_by_ite", action="store_true", help="Sort rows by ITE and add rank and ite +/- se")
    r.add_argument("--on-unseen", dest="on_unseen", choices=["error", "nearest"], default="error", help="Nominal labels the model never saw")

    # simulate
    s = sub.add_parser("simulate", help="Run a simulation experiment and write report.json / report.csv")
    experiments = s.add_subparsers(dest="experiment", required=True)

    sc = experiments.add_parser("cutpoint", help="Cutpoint recovery: GS versus SSS")
    sc.add_argument("--n", default=None, help="Sample size(s), comma-separated (default 50,500)")
    sc.add_argument("--replicates", "--reps", dest="replicates", type=int, default=None, help="Replicates per n (default 50)")
    sc.add_argument("--a", default=None, help="SSS shape values, comma-separated (default 1,2,5,10,20,50,100)")
    sc.add_argument("--c0", type=float, default=None, help="True cutpoint (default 0.5)")
    sc.add_argument("--noise-sd", dest="noise_sd", type=float, default=None, help="Noise SD (default 1; 0 is noiseless)")
    sc.add_argument("--x-dist", dest="x_dist", choices=["uniform", "normal"], default=None, help="Covariate distribution")
    sc.add_argument("--min-arm", dest="min_arm", type=int, default=None, help="Minimum rows per cell (default 5)")
    sc.add_argument("--brent-tol", dest="brent_tol", type=float, default=None, help="Brent tolerance")
    sc.add_argument("--brent-max-iter", dest="brent_max_iter", type=int, default=None, help="Brent iteration cap")

    sm = experiments.add_parser("mse", help="ITE accuracy: RFIT versus separate regression")
    sm.add_argument("--models", default=None, help="ITE models, comma-separated (default I,II,III,IV)")
    sm.add_argument("--n", default=None, help="Training size(s), comma-separated (default 100)")
    sm.add_argument("--n-test", dest="n_test", type=int, default=None, help="Test points per model (default 500)")
    sm.add_argument("--replicates", "--reps", dest="replicates", type=int, default=None, help="Replicates (default 50)")
    sm.add_argument("-b", "--trees", dest="b", type=int, default=None, help="Trees per forest (default 500)")
    _add_tree_options(sm)

    ss = experiments.add_parser("se", help="Jackknife standard errors versus replicate SD")
    ss.add_argument("--model", default=None, help="ITE model (default III)")
    ss.add_argument("--n", type=int, default=None, help="Training size (default 200)")
    ss.add_argument("--n-test", dest="n_test", type=int, default=None, help="Test points (default 20)")
    ss.add_argument("--replicates", "--reps", dest="replicates", type=int, default=None, help="Replicates (default 100)")
    ss.add_argument("-b", "--trees", dest="b", type=int, default=None, help="Trees per forest (default 2000)")
    _add_tree_options(ss)

    st = experiments.add_parser("timing", help="Split-search timing (same as the bench command)")
    simulate_cmd.add_timing_options(st)

    sp = experiments.add_parser("profile", help="Exact and surrogate split statistic over a grid of cuts")
    sp.add_argument("--n", type=int, default=None, help="Sample size (default 500)")
    sp.add_argument("--c0", type=float, default=None, help="True cutpoint (default 0.5)")
    sp.add_argument("--a", default=None, help="SSS shape values, comma-separated (default 1,10,50)")
    sp.add_argument("--n-cuts", dest="n_cuts", type=int, default=None, help="Grid size (default 200)")
    sp.add_argument("--noise-sd", dest="noise_sd", type=float, default=None, help="Noise SD (default 1)")
    sp.add_argument("--x-dist", dest="x_dist", choices=["uniform", "normal"], default=None, help="Covariate distribution")

    for e in (sc, sm, ss, st, sp):
        e.add_argument("--out", default=None, help="Report directory (default ./report_<experiment>)")
        _add_run_options(e)

    # bench
    bn = sub.add_parser("bench", help="Split-search timing table (naive GS, updating GS, SSS)")
    simulate_cmd.add_timing_options(bn)
    bn.add_argument("--out", default="bench", help="Output directory (default ./bench)")
    _add_run_options(bn)

    return p


def main(argv=None) -> int:
    p = build_parser()
    args = p.parse_args(argv)
    configure_logging(args.verbose)

    if args.cmd == "fit":
        return fit_cmd.run(args)
    elif args.cmd == "predict":
        return predict_cmd.run(args)
    elif args.cmd == "simulate":
        return simulate_cmd.run(args)
    elif args.cmd == "bench":
        return bench_cmd.run(args)

    p.error("Unknown command")
    return 2
