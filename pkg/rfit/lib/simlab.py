"""Synthetic trials and the simulation experiments.

Generators:

* ``gen_model_a``: one covariate, a threshold interaction at ``c0``,
  y = 0.5 + 0.5 T + 0.5 D + 0.5 T D + e with D = I(x >= c0).
* ``gen_ite_model``: five uniform covariates, a shared subject effect and
  arm-specific noise around mu0(x) and mu1(x) = mu0(x) + delta(x) for the
  ITE models I-IV (plus a constant-effect sanity model "C").

Experiments (each returns an ``ExperimentReport``):

* cutpoint recovery of GS versus SSS,
* ITE accuracy of RFIT versus separate regression,
* validity of the jackknife standard errors,
* split-search timing (naive GS, updating GS, SSS),
* the Q / surrogate profile over a grid of cutpoints.

Replicate ``r`` of every experiment draws from a generator keyed by
(seed, experiment, ..., r), so reports do not depend on worker count.
"""

import logging
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from joblib import Parallel, delayed

from .baseline import fit_sr
from .data import CONTINUOUS, ColumnMeta, TrialDataset
from .errors import ConfigError
from .forest import ForestParams, fit_rfit, predict_with_se
from .splits import SssConfig, greedy_best_cut, greedy_best_cut_naive, q_profile, sss_best_cut
from .tree import TreeParams
from .utils import DEFAULT_SEED, resolve_threads, seed_sequence, write_json

__all__ = [
    "IteModel",
    "MODELS",
    "get_model",
    "mu0",
    "gen_model_a",
    "gen_ite_model",
    "gen_test_points",
    "ExperimentReport",
    "run_cutpoint_study",
    "run_mse_study",
    "run_se_study",
    "run_timing_bench",
    "run_profile",
    "EXPERIMENTS",
]

logger = logging.getLogger(__name__)

X_DISTS = ("uniform", "normal")

# stream keys, one per experiment
_CUTPOINT, _MSE, _SE, _TIMING, _PROFILE = 1, 2, 3, 4, 5
_TEST_SET = 0
_TRAIN = 1


# ---------------------------------------------------------------------
# ITE models
# ---------------------------------------------------------------------

def mu0(x: np.ndarray) -> np.ndarray:
    x = np.atleast_2d(x)
    return -2.0 - 2.0 * x[:, 0] - 2.0 * x[:, 1] ** 2 + 2.0 * x[:, 2] ** 3


def _delta_linear(x):
    x = np.atleast_2d(x)
    return -2.0 + 2.0 * x[:, 0] + 2.0 * x[:, 1]


def _delta_tree(x):
    x = np.atleast_2d(x)
    return -2.0 + 2.0 * (x[:, 0] <= 0.5) + 2.0 * (x[:, 1] <= 0.5) * (x[:, 2] <= 0.5)


def _delta_exp(x):
    x = np.atleast_2d(x)
    return -6.0 + 0.1 * np.exp(4.0 * x[:, 0]) + 4.0 * np.exp(20.0 * (x[:, 1] - 0.5)) + 3.0 * x[:, 2] + 2.0 * x[:, 3] + x[:, 4]


def _delta_sine(x):
    x = np.atleast_2d(x)
    return -10.0 + 10.0 * np.sin(np.pi * x[:, 0] * x[:, 1]) + 20.0 * (x[:, 2] - 0.5) ** 2 + 10.0 * x[:, 3] + 5.0 * x[:, 4]


def _delta_constant(x):
    return np.ones(np.atleast_2d(x).shape[0])


@dataclass(frozen=True)
class IteModel:
    id: str
    delta: Callable[[np.ndarray], np.ndarray]
    description: str
    p: int = 5

    def mu0(self, x) -> np.ndarray:
        return mu0(x)

    def mu1(self, x) -> np.ndarray:
        return mu0(x) + self.delta(x)


MODELS: Dict[str, IteModel] = {
    m.id: m
    for m in (
        IteModel("I", _delta_linear, "linear ITE"),
        IteModel("II", _delta_tree, "tree-structured ITE"),
        IteModel("III", _delta_exp, "exponential ITE"),
        IteModel("IV", _delta_sine, "sine/quadratic ITE"),
        IteModel("C", _delta_constant, "constant ITE (sanity check)"),
    )
}


def get_model(model_id) -> IteModel:
    if isinstance(model_id, IteModel):
        return model_id
    try:
        return MODELS[str(model_id).upper()]
    except KeyError:
        raise ConfigError(f"Unknown ITE model {model_id!r}; choose from {', '.join(MODELS)}")


# ---------------------------------------------------------------------
# Generators
# ---------------------------------------------------------------------

def _continuous_columns(x: np.ndarray, names: Sequence[str]) -> Tuple[ColumnMeta, ...]:
    return tuple(
        ColumnMeta(name=name, kind=CONTINUOUS, mean=float(x[:, j].mean()), sd=float(x[:, j].std(ddof=1)))
        for j, name in enumerate(names)
    )


def _assign_treatment(n: int, rng: np.random.Generator) -> np.ndarray:
    t = rng.binomial(1, 0.5, size=n)
    while t.sum() == 0 or t.sum() == n:
        t = rng.binomial(1, 0.5, size=n)
    return t


def gen_model_a(
    n: int, k: int, c0: float, rng: np.random.Generator, noise_sd: float = 1.0, x_dist: str = "uniform"
) -> TrialDataset:
    """Single-threshold interaction data.

    ``k = 0`` draws x from uniform[0, 1] (or N(0, 1) with ``x_dist="normal"``);
    ``k >= 2`` draws x from the discrete uniform on {1/k, ..., k/k}.
    """
    if n < 10:
        raise ConfigError(f"n must be >= 10, got {n}")
    if k != 0 and k < 2:
        raise ConfigError(f"k must be 0 (continuous) or >= 2, got {k}")
    if x_dist not in X_DISTS:
        raise ConfigError(f"x_dist must be one of {X_DISTS}, got {x_dist!r}")
    if x_dist == "normal" and k:
        raise ConfigError("A discrete covariate (k >= 2) is only defined for x_dist='uniform'")
    if noise_sd < 0:
        raise ConfigError(f"noise_sd must be >= 0, got {noise_sd}")

    if k:
        x = rng.integers(1, k + 1, size=n) / k
    elif x_dist == "normal":
        x = rng.standard_normal(n)
    else:
        x = rng.uniform(0.0, 1.0, size=n)
    t = _assign_treatment(n, rng)
    eps = rng.standard_normal(n)
    d = (x >= c0).astype(np.float64)
    y = 0.5 + 0.5 * t + 0.5 * d + 0.5 * t * d + noise_sd * eps
    x = x.reshape(-1, 1)
    return TrialDataset(y=y, t=t, x=x, columns=_continuous_columns(x, ["x"]))


def gen_test_points(model, n: int, rng: np.random.Generator) -> Tuple[np.ndarray, np.ndarray]:
    model = get_model(model)
    x = rng.uniform(0.0, 1.0, size=(n, model.p))
    return x, model.delta(x)


def gen_ite_model(model, n: int, rng: np.random.Generator) -> Tuple[TrialDataset, np.ndarray, np.ndarray, np.ndarray]:
    """Training trial from an ITE model; returns (data, true delta, y0', y1') per row."""
    model = get_model(model)
    if n < 10:
        raise ConfigError(f"n must be >= 10, got {n}")
    x = rng.uniform(0.0, 1.0, size=(n, model.p))
    alpha = rng.standard_normal(n)
    eps0 = rng.standard_normal(n)
    eps1 = rng.standard_normal(n)
    t = _assign_treatment(n, rng)
    delta = model.delta(x)
    base = model.mu0(x)
    y0 = base + alpha + eps0
    y1 = base + delta + alpha + eps1
    y = np.where(t == 1, y1, y0)
    names = [f"x{j + 1}" for j in range(model.p)]
    data = TrialDataset(y=y, t=t, x=x, columns=_continuous_columns(x, names))
    return data, delta, y0, y1


# ---------------------------------------------------------------------
# Reports
# ---------------------------------------------------------------------

@dataclass
class ExperimentReport:
    """Config echo, one row per replicate metric, optional per-point table, and a summary."""

    experiment: str
    config: dict
    seed: int
    rows: List[dict]
    summary: dict
    points: List[dict] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "experiment": self.experiment,
            "config": self.config,
            "seed": self.seed,
            "summary": self.summary,
            "rows": self.rows,
            "points": self.points,
        }

    def frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.rows)

    def write(self, directory) -> List[Path]:
        """report.json, report.csv (rows) and, when present, points.csv."""
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        written = [directory / "report.json", directory / "report.csv"]
        write_json(written[0], self.to_dict())
        self.frame().to_csv(written[1], index=False, lineterminator="\n")
        if self.points:
            written.append(directory / "points.csv")
            pd.DataFrame(self.points).to_csv(written[-1], index=False, lineterminator="\n")
        return written


def _stream(seed: int, *key: int) -> np.random.Generator:
    return np.random.default_rng(seed_sequence(seed, *key))


def _child_seed(seed: int, *key: int) -> int:
    return int(seed_sequence(seed, *key).generate_state(1)[0])


def _as_list(value) -> list:
    return list(value) if isinstance(value, (list, tuple, np.ndarray)) else [value]


# ---------------------------------------------------------------------
# Cutpoint recovery
# ---------------------------------------------------------------------

def _cutpoint_replicate(n, r, seed, c0, a_grid, sss: SssConfig, min_arm, noise_sd, x_dist) -> List[dict]:
    rng = _stream(seed, _CUTPOINT, n, r)
    data = gen_model_a(n, 0, c0, rng, noise_sd=noise_sd, x_dist=x_dist)
    x, y, t = data.x[:, 0], data.y, data.t
    rows = []
    gs = greedy_best_cut(x, y, t, min_arm)
    rows.append(dict(n=n, replicate=r, method="GS", a=None, cutpoint=gs.cutpoint, valid=gs.valid, iterations=0))
    for a in a_grid:
        cfg = SssConfig(a=a, brent_tol=sss.brent_tol, brent_max_iter=sss.brent_max_iter, cell_floor=sss.cell_floor)
        cand = sss_best_cut(x, y, t, cfg, min_arm=min_arm)
        rows.append(
            dict(n=n, replicate=r, method="SSS", a=float(a), cutpoint=cand.cutpoint, valid=cand.valid, iterations=cand.iterations)
        )
    return rows


def run_cutpoint_study(
    n=(50, 500),
    replicates: int = 50,
    a_grid=(1, 2, 5, 10, 20, 50, 100),
    seed: int = DEFAULT_SEED,
    c0: float = 0.5,
    noise_sd: float = 1.0,
    x_dist: str = "uniform",
    min_arm: int = 5,
    sss: SssConfig = SssConfig(),
    n_jobs: Optional[int] = None,
) -> ExperimentReport:
    """Estimate the threshold of Model-A data by GS and by SSS at each ``a``.

    Every reported cutpoint enters the MSE about ``c0``, including SSS optima
    whose hard split falls short of ``min_arm``; GS replicates without any
    admissible cut are counted in ``missing``.
    """
    n_grid = [int(v) for v in _as_list(n)]
    a_grid = [float(a) for a in _as_list(a_grid)]
    if replicates < 10:
        raise ConfigError(f"replicates must be >= 10, got {replicates}")
    if not n_grid or not a_grid:
        raise ConfigError("n and a grids must be nonempty")
    for a in a_grid:
        SssConfig(a=a)
    logger.info("cutpoint study: n=%s, %d replicates, a=%s", n_grid, replicates, a_grid)
    chunks = Parallel(n_jobs=resolve_threads(n_jobs))(
        delayed(_cutpoint_replicate)(nv, r, seed, c0, a_grid, sss, min_arm, noise_sd, x_dist)
        for nv in n_grid
        for r in range(replicates)
    )
    rows = [row for chunk in chunks for row in chunk]

    frame = pd.DataFrame(rows)
    frame["a"] = frame["a"].astype(float)
    mse = []
    for (nv, method, a), grp in frame.groupby(["n", "method", "a"], dropna=False, sort=True):
        cuts = grp["cutpoint"].dropna().to_numpy(dtype=np.float64)
        mse.append(
            dict(
                n=int(nv),
                method=method,
                a=None if pd.isna(a) else float(a),
                mse=float(np.mean((cuts - c0) ** 2)) if cuts.size else None,
                mean_cutpoint=float(cuts.mean()) if cuts.size else None,
                sd_cutpoint=float(cuts.std(ddof=1)) if cuts.size > 1 else None,
                missing=int(grp.shape[0] - cuts.size),
                mean_iterations=float(grp["iterations"].mean()),
            )
        )
    config = dict(n=n_grid, replicates=replicates, a_grid=a_grid, c0=c0, noise_sd=noise_sd, x_dist=x_dist,
                  min_arm=min_arm, sss=sss.to_dict())
    return ExperimentReport("cutpoint", config, seed, rows, {"mse": mse})


# ---------------------------------------------------------------------
# RFIT versus SR
# ---------------------------------------------------------------------

def _mse_replicate(model_id, n, r, seed, x_test, params: ForestParams) -> Tuple[np.ndarray, np.ndarray]:
    rng = _stream(seed, _MSE, _TRAIN, list(MODELS).index(model_id), n, r)
    data, _, _, _ = gen_ite_model(model_id, n, rng)
    replicate_params = ForestParams(b=params.b, tree=params.tree, seed=_child_seed(seed, _MSE, list(MODELS).index(model_id), n, r))
    rfit = fit_rfit(data, replicate_params, n_jobs=1)
    sr = fit_sr(data, replicate_params, n_jobs=1)
    return rfit.predict(x_test), sr.predict(x_test)


def _fit_line(truth: np.ndarray, estimate: np.ndarray) -> Tuple[Optional[float], Optional[float]]:
    if not np.ptp(truth) > 0:
        return None, None
    slope, intercept = np.polyfit(truth, estimate, 1)
    return float(slope), float(intercept)


def run_mse_study(
    models=("I", "II", "III", "IV"),
    n=100,
    n_test: int = 500,
    replicates: int = 50,
    forest: ForestParams = ForestParams(b=500),
    seed: int = DEFAULT_SEED,
    n_jobs: Optional[int] = None,
) -> ExperimentReport:
    """Train RFIT and SR on fresh data per replicate and score both on one fixed test set per model.

    ``points`` holds, per test point, the mean estimate over replicates next
    to the true delta; the summary fits a least-squares line through them
    (slope below 1 means high effects are pulled down and low ones up).
    """
    model_ids = [get_model(m).id for m in _as_list(models)]
    n_grid = [int(v) for v in _as_list(n)]
    if replicates < 1:
        raise ConfigError(f"replicates must be >= 1, got {replicates}")
    check_sizes = [v for v in n_grid if v < 10]
    if check_sizes or n_test < 1:
        raise ConfigError(f"training sizes must be >= 10 and n_test >= 1 (got n={n_grid}, n_test={n_test})")
    workers = resolve_threads(n_jobs)

    rows, points, summary = [], [], []
    for model_id in model_ids:
        x_test, delta = gen_test_points(model_id, n_test, _stream(seed, _MSE, _TEST_SET, list(MODELS).index(model_id)))
        for nv in n_grid:
            logger.info("mse study: model %s, n=%d, %d replicates, B=%d", model_id, nv, replicates, forest.b)
            preds = Parallel(n_jobs=workers)(
                delayed(_mse_replicate)(model_id, nv, r, seed, x_test, forest) for r in range(replicates)
            )
            for method, k in (("RFIT", 0), ("SR", 1)):
                est = np.stack([p[k] for p in preds])
                mses = ((est - delta) ** 2).mean(axis=1)
                rows.extend(dict(model=model_id, n=nv, replicate=r, method=method, mse=float(m)) for r, m in enumerate(mses))
                mean_hat = est.mean(axis=0)
                points.extend(
                    dict(model=model_id, n=nv, method=method, point=i, delta=float(delta[i]), mean_estimate=float(mean_hat[i]))
                    for i in range(n_test)
                )
                slope, intercept = _fit_line(delta, mean_hat)
                summary.append(
                    dict(
                        model=model_id,
                        n=nv,
                        method=method,
                        mean_mse=float(mses.mean()),
                        sd_mse=float(mses.std(ddof=1)) if replicates > 1 else None,
                        slope=slope,
                        intercept=intercept,
                    )
                )
    config = dict(models=model_ids, n=n_grid, n_test=n_test, replicates=replicates, forest=forest.to_dict())
    return ExperimentReport("mse", config, seed, rows, {"methods": summary}, points)


# ---------------------------------------------------------------------
# Standard error validity
# ---------------------------------------------------------------------

def _se_replicate(model_id, n, r, seed, x_test, params: ForestParams) -> np.ndarray:
    rng = _stream(seed, _SE, _TRAIN, r)
    data, _, _, _ = gen_ite_model(model_id, n, rng)
    replicate_params = ForestParams(b=params.b, tree=params.tree, seed=_child_seed(seed, _SE, r))
    forest = fit_rfit(data, replicate_params, n_jobs=1)
    out = np.empty((x_test.shape[0], 6))
    for i, pred in enumerate(predict_with_se(forest, x_test)):
        out[i] = (pred.estimate, pred.se("raw"), pred.se("c0"), pred.se("c"), pred.clamped_c0, pred.clamped_c)
    return out


def run_se_study(
    model="III",
    n: int = 200,
    n_test: int = 20,
    replicates: int = 100,
    b: int = 2000,
    seed: int = DEFAULT_SEED,
    tree: TreeParams = TreeParams(),
    n_jobs: Optional[int] = None,
) -> ExperimentReport:
    """Compare the spread of RFIT estimates across replicates with the mean jackknife SEs.

    Per test point: replicate SD of the estimate, mean raw / c0 / c standard
    errors, their ratios to the SD and how often each corrected variance was
    clamped at zero.
    """
    model_id = get_model(model).id
    if replicates < 2:
        raise ConfigError(f"replicates must be >= 2 to estimate a replicate SD, got {replicates}")
    if b < 2:
        raise ConfigError(f"b must be >= 2 for jackknife standard errors, got {b}")
    params = ForestParams(b=b, tree=tree, seed=seed)
    x_test, delta = gen_test_points(model_id, n_test, _stream(seed, _SE, _TEST_SET))
    logger.info("se study: model %s, n=%d, %d test points, %d replicates, B=%d", model_id, n, n_test, replicates, b)
    results = Parallel(n_jobs=resolve_threads(n_jobs))(
        delayed(_se_replicate)(model_id, n, r, seed, x_test, params) for r in range(replicates)
    )
    stack = np.stack(results)  # replicates x points x fields

    rows = []
    for r in range(replicates):
        for i in range(n_test):
            est, se_raw, se_c0, se_c, cl0, cl = stack[r, i]
            rows.append(
                dict(replicate=r, point=i, estimate=float(est), se_raw=float(se_raw), se_c0=float(se_c0),
                     se_c=float(se_c), clamped_c0=bool(cl0), clamped_c=bool(cl))
            )
    sd = stack[:, :, 0].std(axis=0, ddof=1)
    mean_se = stack[:, :, 1:4].mean(axis=0)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratios = mean_se / sd[:, None]
    points = [
        dict(
            point=i,
            delta=float(delta[i]),
            mean_estimate=float(stack[:, i, 0].mean()),
            sd=float(sd[i]),
            mean_se_raw=float(mean_se[i, 0]),
            mean_se_c0=float(mean_se[i, 1]),
            mean_se_c=float(mean_se[i, 2]),
            ratio_raw=float(ratios[i, 0]),
            ratio_c0=float(ratios[i, 1]),
            ratio_c=float(ratios[i, 2]),
            clamped_c0=int(stack[:, i, 4].sum()),
            clamped_c=int(stack[:, i, 5].sum()),
        )
        for i in range(n_test)
    ]
    summary = {
        "median_ratio_raw": float(np.median(ratios[:, 0])),
        "median_ratio_c0": float(np.median(ratios[:, 1])),
        "median_ratio_c": float(np.median(ratios[:, 2])),
        "clamped_c0": int(stack[:, :, 4].sum()),
        "clamped_c": int(stack[:, :, 5].sum()),
        "raw_exceeds_c_everywhere": bool((mean_se[:, 0] > mean_se[:, 2]).all()),
    }
    config = dict(model=model_id, n=n, n_test=n_test, replicates=replicates, b=b, tree=tree.to_dict())
    return ExperimentReport("se", config, seed, rows, summary, points)


# ---------------------------------------------------------------------
# Timing
# ---------------------------------------------------------------------

TIMED_METHODS = ("naive_gs", "updating_gs", "sss")


def _timed(fn) -> Tuple[float, object]:
    start = time.perf_counter()
    out = fn()
    return time.perf_counter() - start, out


def _loglog_slope(sizes: Sequence[int], seconds: Sequence[float]) -> Optional[float]:
    sizes = np.asarray(sizes, dtype=np.float64)
    seconds = np.asarray(seconds, dtype=np.float64)
    ok = seconds > 0
    if ok.sum() < 2 or np.unique(sizes[ok]).size < 2:
        return None
    return float(np.polyfit(np.log(sizes[ok]), np.log(seconds[ok]), 1)[0])


def run_timing_bench(
    n_grid=(50, 100, 500, 1000, 2000, 10000),
    k_grid=(10, 100, 500),
    repeats: int = 10,
    seed: int = DEFAULT_SEED,
    sss: SssConfig = SssConfig(),
    min_arm: int = 5,
    methods: Sequence[str] = TIMED_METHODS,
) -> ExperimentReport:
    """Wall time of one best-cut search on Model-A data with a k-valued covariate.

    Only the split call is timed; each (n, k, method) cell runs one discarded
    warm-up call first. Runs serially so cells do not compete for cores.
    Timings vary between runs; everything else in the report is seeded.
    """
    n_grid = [int(v) for v in _as_list(n_grid)]
    k_grid = [int(v) for v in _as_list(k_grid)]
    if not n_grid or not k_grid:
        raise ConfigError("n_grid and k_grid must be nonempty")
    if repeats < 1:
        raise ConfigError(f"repeats must be >= 1, got {repeats}")
    unknown = [m for m in methods if m not in TIMED_METHODS]
    if unknown:
        raise ConfigError(f"Unknown timing method(s) {unknown}; choose from {TIMED_METHODS}")

    calls = {
        "naive_gs": lambda x, y, t: greedy_best_cut_naive(x, y, t, min_arm),
        "updating_gs": lambda x, y, t: greedy_best_cut(x, y, t, min_arm),
        "sss": lambda x, y, t: sss_best_cut(x, y, t, sss, min_arm=min_arm),
    }
    rows, table = [], []
    for nv in n_grid:
        for k in k_grid:
            logger.info("timing n=%d, k=%d", nv, k)
            cell = {m: [] for m in methods}
            iterations = []
            for rep in range(repeats):
                data = gen_model_a(nv, k, 0.5, _stream(seed, _TIMING, nv, k, rep))
                x, y, t = data.x[:, 0], data.y, data.t
                for method in methods:
                    if rep == 0:
                        calls[method](x, y, t)
                    seconds, cand = _timed(lambda: calls[method](x, y, t))
                    cell[method].append(seconds)
                    if method == "sss":
                        iterations.append(cand.iterations)
                    rows.append(dict(n=nv, k=k, repeat=rep, method=method, seconds=seconds, cutpoint=cand.cutpoint,
                                     iterations=cand.iterations))
            entry = dict(n=nv, k=k)
            entry.update({m: float(np.mean(v)) for m, v in cell.items()})
            if iterations:
                entry["sss_iterations"] = float(np.mean(iterations))
            table.append(entry)

    frame = pd.DataFrame(table)
    matrices = {
        m: {"rows": n_grid, "columns": k_grid, "seconds": frame.pivot(index="n", columns="k", values=m).loc[n_grid, k_grid].to_numpy().tolist()}
        for m in methods
    }
    slopes = {
        m: {str(k): _loglog_slope(frame[frame.k == k].n.tolist(), frame[frame.k == k][m].tolist()) for k in k_grid}
        for m in methods
    }
    config = dict(n_grid=n_grid, k_grid=k_grid, repeats=repeats, sss=sss.to_dict(), min_arm=min_arm, methods=list(methods))
    return ExperimentReport("timing", config, seed, rows, {"tables": matrices, "loglog_slope_in_n": slopes}, table)


# ---------------------------------------------------------------------
# Statistic profile
# ---------------------------------------------------------------------

def run_profile(
    n: int = 500,
    c0: float = 0.5,
    a_grid=(1, 10, 50),
    n_cuts: int = 200,
    seed: int = DEFAULT_SEED,
    noise_sd: float = 1.0,
    x_dist: str = "uniform",
) -> ExperimentReport:
    """Exact Q and the surrogate at each ``a`` over an even grid of cuts on one Model-A sample."""
    if n_cuts < 2:
        raise ConfigError(f"n_cuts must be >= 2, got {n_cuts}")
    a_grid = [float(a) for a in _as_list(a_grid)]
    data = gen_model_a(n, 0, c0, _stream(seed, _PROFILE), noise_sd=noise_sd, x_dist=x_dist)
    x, y, t = data.x[:, 0], data.y, data.t
    cuts = np.linspace(x.min(), x.max(), n_cuts + 2)[1:-1]
    exact, _ = q_profile(x, y, t, cuts)
    columns = {"cut": cuts, "q": exact}
    for a in a_grid:
        columns[f"q_sss_a{a:g}"] = q_profile(x, y, t, cuts, a=a)[1]
    frame = pd.DataFrame(columns)
    rows = [{k: (None if isinstance(v, float) and np.isnan(v) else v) for k, v in rec.items()} for rec in frame.to_dict("records")]
    best = int(np.nanargmax(exact)) if np.isfinite(exact).any() else None
    summary = {
        "argmax_q": float(cuts[best]) if best is not None else None,
        "argmax_sss": {f"{a:g}": float(cuts[int(np.argmax(frame[f'q_sss_a{a:g}']))]) for a in a_grid},
    }
    config = dict(n=n, c0=c0, a_grid=a_grid, n_cuts=n_cuts, noise_sd=noise_sd, x_dist=x_dist)
    return ExperimentReport("profile", config, seed, rows, summary)


EXPERIMENTS = {
    "cutpoint": run_cutpoint_study,
    "mse": run_mse_study,
    "se": run_se_study,
    "timing": run_timing_bench,
    "profile": run_profile,
}
