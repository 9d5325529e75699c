"""Random forest of interaction trees with infinitesimal-jackknife standard errors.

Tree ``b`` is grown on a multinomial bootstrap resample whose per-row counts
are kept (``counts[b, i]``, 16-bit) because the jackknife variance is built
from the covariance between those counts and the per-tree predictions.
Every tree draws from its own generator keyed by (seed, b), so serial and
parallel fits are bit-identical.
"""

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

import numpy as np
from joblib import Parallel, delayed

from .data import ColumnMeta, SchemaConfig, TrialDataset
from .errors import ConfigError, PredictionError, ResampleError
from .tree import InteractionTree, TreeParams, grow_tree
from .utils import DEFAULT_SEED, load_json, resolve_threads, seed_sequence, write_json

__all__ = [
    "ForestParams",
    "RfitForest",
    "ItePrediction",
    "SE_VARIANTS",
    "MAX_REDRAWS",
    "draw_counts",
    "fit_rfit",
    "predict_matrix",
    "predict_ite",
    "ij_variance",
    "predict_with_se",
    "save_forest",
    "load_forest",
]

logger = logging.getLogger(__name__)

MAX_REDRAWS = 100
SE_VARIANTS = ("raw", "c0", "c")
MODEL_FORMAT = "rfit-forest/1"

# rows per block in the jackknife products (bounds the m x n work arrays)
_IJ_CHUNK = 256


@dataclass(frozen=True)
class ForestParams:
    b: int = 2000
    tree: TreeParams = field(default_factory=TreeParams)
    seed: int = DEFAULT_SEED

    def __post_init__(self):
        if isinstance(self.tree, dict):
            object.__setattr__(self, "tree", TreeParams.from_dict(self.tree))
        if self.b < 1:
            raise ConfigError(f"b (number of trees) must be >= 1, got {self.b}")

    def to_dict(self) -> dict:
        return {"b": self.b, "seed": self.seed, "tree": self.tree.to_dict()}

    @classmethod
    def from_dict(cls, d: dict) -> "ForestParams":
        kw = {k: d[k] for k in ("b", "seed") if k in d}
        if "tree" in d:
            kw["tree"] = TreeParams.from_dict(d["tree"])
        return cls(**kw)


@dataclass(frozen=True, eq=False)
class RfitForest:
    trees: Tuple[InteractionTree, ...]
    counts: np.ndarray
    params: ForestParams
    columns: Tuple[ColumnMeta, ...]

    @property
    def b(self) -> int:
        return len(self.trees)

    @property
    def n(self) -> int:
        return int(self.counts.shape[1])

    def predict(self, x) -> np.ndarray:
        return predict_matrix(self, x).mean(axis=1)


@dataclass(frozen=True)
class ItePrediction:
    estimate: float
    var_raw: float
    var_c0: float
    var_c: float
    clamped_c0: bool = False
    clamped_c: bool = False

    def variance(self, variant: str = "c") -> float:
        if variant not in SE_VARIANTS:
            raise ConfigError(f"SE variant must be one of {SE_VARIANTS}, got {variant!r}")
        return {"raw": self.var_raw, "c0": self.var_c0, "c": self.var_c}[variant]

    def se(self, variant: str = "c") -> float:
        return float(np.sqrt(self.variance(variant)))


def draw_counts(n: int, t, min_arm: int, rng: np.random.Generator) -> np.ndarray:
    """Multinomial resample counts of size ``n``, redrawn while a root arm is below ``min_arm``."""
    t = np.asarray(t)
    probs = np.full(n, 1.0 / n)
    dtype = np.uint16 if n <= np.iinfo(np.uint16).max else np.uint32
    for attempt in range(MAX_REDRAWS + 1):
        counts = rng.multinomial(n, probs)
        n1 = int(counts[t == 1].sum())
        if n1 >= min_arm and n - n1 >= min_arm:
            if attempt:
                logger.warning("bootstrap resample redrawn %d time(s) to keep %d rows per arm", attempt, min_arm)
            return counts.astype(dtype)
    raise ResampleError(
        f"{MAX_REDRAWS} redraws in a row left an arm with fewer than {min_arm} rows; "
        f"the data has {int((t == 1).sum())} treated and {int((t == 0).sum())} control rows"
    )


def _fit_one(data: TrialDataset, params: ForestParams, b: int) -> Tuple[np.ndarray, InteractionTree]:
    rng = np.random.default_rng(seed_sequence(params.seed, b))
    counts = draw_counts(data.n, data.t, params.tree.min_arm, rng)
    return counts, grow_tree(data, counts, params.tree, rng)


def fit_rfit(data: TrialDataset, params: ForestParams = ForestParams(), n_jobs: Optional[int] = None) -> RfitForest:
    params.tree.resolve_mtry(data.p)
    n_jobs = resolve_threads(n_jobs)
    logger.info("fitting %d interaction trees on n=%d, p=%d (n_jobs=%d)", params.b, data.n, data.p, n_jobs)
    results = Parallel(n_jobs=n_jobs)(delayed(_fit_one)(data, params, b) for b in range(params.b))
    counts = np.stack([c for c, _ in results])
    trees = tuple(tree for _, tree in results)
    return RfitForest(trees=trees, counts=counts, params=params, columns=data.columns)


def predict_matrix(forest: RfitForest, x) -> np.ndarray:
    """Per-tree predictions, shape (rows, B)."""
    x = np.array(x, dtype=np.float64, ndmin=2)
    out = np.empty((x.shape[0], forest.b))
    for b, tree in enumerate(forest.trees):
        out[:, b] = tree.predict(x)
    return out


def predict_ite(forest: RfitForest, xrow) -> Tuple[float, np.ndarray]:
    """Forest average over trees for one row, plus the per-tree predictions."""
    preds = predict_matrix(forest, np.asarray(xrow, dtype=np.float64).reshape(1, -1))[0]
    return float(preds.mean()), preds


def ij_variance(counts, preds, estimate) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Infinitesimal-jackknife variance and its two bias corrections (before clamping).

    ``preds`` is (B,) or (m, B); ``estimate`` matching scalar or (m,).
    With Z[b, i] = (counts[b, i] - 1) * (preds[b] - estimate):

    * raw: sum_i mean_b(Z[:, i])**2
    * c0:  raw - sum_i sum_b (Z[b, i] - mean_b Z[:, i])**2 / B**2
    * c:   raw - (n - 1) / B**2 * sum_b (preds[b] - estimate)**2
    """
    counts = np.asarray(counts, dtype=np.float64)
    preds = np.asarray(preds, dtype=np.float64)
    single = preds.ndim == 1
    preds = np.atleast_2d(preds)
    est = np.atleast_1d(np.asarray(estimate, dtype=np.float64))
    B, n = counts.shape
    if preds.shape[1] != B or est.shape[0] != preds.shape[0]:
        raise PredictionError(f"Shape mismatch: counts {counts.shape}, preds {preds.shape}, estimate {est.shape}")
    if B < 2:
        raise PredictionError("Jackknife variance needs at least 2 trees")

    centered = counts - 1.0
    centered_sq = centered * centered
    dev = preds - est[:, None]
    raw = np.empty(dev.shape[0])
    spread = np.empty(dev.shape[0])
    for lo in range(0, dev.shape[0], _IJ_CHUNK):
        d = dev[lo:lo + _IJ_CHUNK]
        zbar = d @ centered / B
        zsq = (d * d) @ centered_sq
        raw[lo:lo + _IJ_CHUNK] = (zbar * zbar).sum(axis=1)
        spread[lo:lo + _IJ_CHUNK] = (zsq - B * zbar * zbar).sum(axis=1)
    var_c0 = raw - spread / B ** 2
    var_c = raw - (n - 1) / B ** 2 * (dev * dev).sum(axis=1)
    if single:
        return raw[:1], var_c0[:1], var_c[:1]
    return raw, var_c0, var_c


def predict_with_se(forest: RfitForest, x) -> List[ItePrediction]:
    """Point estimate and jackknife variances for every row; negative corrected variances clamp to 0."""
    preds = predict_matrix(forest, x)
    est = preds.mean(axis=1)
    if forest.b < 2:
        logger.warning("forest has a single tree; standard errors are undefined")
        nan = float("nan")
        return [ItePrediction(float(e), nan, nan, nan) for e in est]
    raw, c0, c = ij_variance(forest.counts, preds, est)
    out = []
    for k in range(est.shape[0]):
        out.append(
            ItePrediction(
                estimate=float(est[k]),
                var_raw=max(float(raw[k]), 0.0),
                var_c0=max(float(c0[k]), 0.0),
                var_c=max(float(c[k]), 0.0),
                clamped_c0=bool(c0[k] < 0),
                clamped_c=bool(c[k] < 0),
            )
        )
    n_clamped = sum(p.clamped_c for p in out)
    if n_clamped:
        logger.info("%d of %d corrected variances were negative and clamped to 0 (B=%d)", n_clamped, len(out), forest.b)
    return out


# ---------------------------------------------------------------------
# Persistence
# ---------------------------------------------------------------------

def save_forest(forest: RfitForest, directory, schema: Optional[SchemaConfig] = None, extra: Optional[dict] = None) -> Path:
    """Write manifest.json plus one tree_<b>.json (tree and its resample counts) per tree."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    manifest = {
        "format": MODEL_FORMAT,
        "params": forest.params.to_dict(),
        "b": forest.b,
        "n": forest.n,
        "columns": [c.to_dict() for c in forest.columns],
        "schema": schema.to_dict() if schema is not None else None,
        "extra": extra or {},
    }
    write_json(directory / "manifest.json", manifest)
    for b, tree in enumerate(forest.trees):
        payload = tree.to_dict()
        payload["index"] = b
        payload["counts"] = forest.counts[b].tolist()
        write_json(directory / f"tree_{b}.json", payload)
    return directory


def load_forest(directory) -> Tuple[RfitForest, dict]:
    """Read a model directory; returns the forest and the raw manifest."""
    directory = Path(directory)
    manifest = load_json(directory / "manifest.json")
    if manifest.get("format") != MODEL_FORMAT:
        raise ConfigError(f"{directory} is not an rfit model directory (format {manifest.get('format')!r})")
    columns = tuple(ColumnMeta.from_dict(c) for c in manifest["columns"])
    params = ForestParams.from_dict(manifest["params"])
    trees: List[InteractionTree] = []
    rows: List[Sequence[int]] = []
    for b in range(int(manifest["b"])):
        payload = load_json(directory / f"tree_{b}.json")
        trees.append(InteractionTree.from_dict(payload, columns))
        rows.append(payload["counts"])
    n = int(manifest["n"])
    counts = np.asarray(rows, dtype=np.uint16 if n <= np.iinfo(np.uint16).max else np.uint32).reshape(len(trees), n)
    return RfitForest(trees=tuple(trees), counts=counts, params=params, columns=columns), manifest
