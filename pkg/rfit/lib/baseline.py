"""Separate-regression (SR) baseline.

Two bagged regression forests, one per arm, estimate the arm-wise mean
responses; their difference is the ITE estimate. The regression trees share
the interaction-tree node layout and routing (``tree.InteractionTree``); a
node's value is its weighted mean response and its arm count sits in the
``n1`` or ``n0`` slot of the arm the forest models.
"""

import logging
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np
from joblib import Parallel, delayed

from .data import ColumnMeta, TrialDataset, order_levels_by_mean
from .errors import DegenerateColumnError, GrowthError
from .forest import ForestParams
from .tree import InteractionTree, TreeNode, TreeParams
from .utils import resolve_threads, seed_sequence

__all__ = [
    "RegressionForest",
    "SrModel",
    "sse_best_cut",
    "grow_regression_tree",
    "fit_regression_forest",
    "fit_sr",
    "predict_sr",
]

logger = logging.getLogger(__name__)

_GAIN_TOL = 1e-12


def sse_best_cut(x, y, min_leaf: int, weights=None) -> Optional[Tuple[float, float]]:
    """Cut minimizing the children's weighted SSE; returns (cutpoint, SSE reduction) or None.

    Equivalent to maximizing S_L**2 / n_L + S_R**2 / n_R; ties go to the smallest cut.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    w = np.ones(x.shape[0]) if weights is None else np.asarray(weights, dtype=np.float64)
    order = np.argsort(x, kind="stable")
    xs, ys, ws = x[order], y[order], w[order]
    boundary = np.flatnonzero(xs[1:] > xs[:-1])
    if boundary.size == 0:
        return None
    cn = np.cumsum(ws)
    cs = np.cumsum(ws * ys)
    total_n, total_s = cn[-1], cs[-1]
    nL, sL = cn[boundary], cs[boundary]
    nR, sR = total_n - nL, total_s - sL
    ok = (nL >= min_leaf) & (nR >= min_leaf)
    if not ok.any():
        return None
    with np.errstate(divide="ignore", invalid="ignore"):
        score = np.where(ok, sL * sL / nL + sR * sR / nR, -np.inf)
    best = int(np.argmax(score))
    gain = float(score[best] - total_s * total_s / total_n)
    total_ss = float((ws * ys * ys).sum() - total_s * total_s / total_n)
    if not gain > _GAIN_TOL * max(total_ss, 0.0) or not total_ss > 0:
        return None
    i = boundary[best]
    return float(0.5 * (xs[i] + xs[i + 1])), gain


def grow_regression_tree(
    y,
    x,
    weights,
    params: TreeParams,
    rng: np.random.Generator,
    columns: Optional[Sequence[ColumnMeta]] = None,
    arm: int = 1,
) -> InteractionTree:
    """CART-style regression tree over ``mtry`` covariates drawn per node.

    Leaves need at least ``params.min_arm`` weighted rows; a node stops at
    ``max_depth``, below ``min_node`` weighted rows, on constant responses or
    when no cut reduces the SSE. Nominal columns are ordered by level mean at
    the root.
    """
    y = np.asarray(y, dtype=np.float64)
    x = np.array(x, dtype=np.float64, ndmin=2)
    if columns is None:
        columns = tuple(ColumnMeta(name=f"x{j + 1}", kind="continuous") for j in range(x.shape[1]))
    columns = tuple(columns)
    w_all = np.ones(y.shape[0]) if weights is None else np.asarray(weights, dtype=np.float64)
    rows = np.flatnonzero(w_all > 0)
    if rows.size == 0:
        raise GrowthError("Regression tree has no rows with positive weight")
    y, x, w = y[rows], x[rows], w_all[rows]

    encodings = {}
    dropped = set()
    for j, col in enumerate(columns):
        if not col.is_nominal:
            continue
        labels = np.asarray(col.levels, dtype=object)[x[:, j].astype(np.int64)]
        try:
            x[:, j], encodings[j] = order_levels_by_mean(labels, y, weights=w, levels=col.levels)
        except DegenerateColumnError:
            dropped.add(j)

    p = x.shape[1]
    mtry = params.resolve_mtry(p)
    nodes: List[TreeNode] = []
    stack = [(-1, True, np.arange(y.shape[0]), 0)]
    while stack:
        parent, is_left, idx, depth = stack.pop()
        wn, yn = w[idx], y[idx]
        size = float(wn.sum())
        count = {"n1": size, "n0": 0.0} if arm == 1 else {"n1": 0.0, "n0": size}
        node_id = len(nodes)
        nodes.append(TreeNode(depth=depth, value=float((wn * yn).sum() / size), **count))
        if parent >= 0:
            if is_left:
                nodes[parent].left = node_id
            else:
                nodes[parent].right = node_id
        if depth >= params.max_depth or size < params.min_node or yn.max() == yn.min():
            continue

        best = None
        for j in np.sort(rng.choice(p, size=mtry, replace=False)):
            if int(j) in dropped:
                continue
            found = sse_best_cut(x[idx, j], yn, params.min_arm, wn)
            if found is not None and (best is None or found[1] > best[2]):
                best = (int(j), found[0], found[1])
        if best is None:
            continue
        j, cut, gain = best
        node = nodes[node_id]
        node.covariate, node.cutpoint, node.q = j, cut, gain
        go_left = x[idx, j] <= cut
        stack.append((node_id, False, idx[~go_left], depth + 1))
        stack.append((node_id, True, idx[go_left], depth + 1))

    return InteractionTree(nodes=nodes, columns=columns, encodings=encodings)


@dataclass(frozen=True, eq=False)
class RegressionForest:
    trees: Tuple[InteractionTree, ...]
    arm: int
    n: int

    def predict_matrix(self, x) -> np.ndarray:
        x = np.array(x, dtype=np.float64, ndmin=2)
        out = np.empty((x.shape[0], len(self.trees)))
        for b, tree in enumerate(self.trees):
            out[:, b] = tree.predict(x)
        return out

    def predict(self, x) -> np.ndarray:
        return self.predict_matrix(x).mean(axis=1)


def _fit_regression_tree(y, x, columns, params: ForestParams, arm: int, b: int) -> InteractionTree:
    rng = np.random.default_rng(seed_sequence(params.seed, arm, b))
    n = y.shape[0]
    counts = rng.multinomial(n, np.full(n, 1.0 / n))
    return grow_regression_tree(y, x, counts, params.tree, rng, columns=columns, arm=arm)


def fit_regression_forest(
    y, x, columns: Sequence[ColumnMeta], params: ForestParams, arm: int, n_jobs: Optional[int] = None
) -> RegressionForest:
    y = np.asarray(y, dtype=np.float64)
    x = np.array(x, dtype=np.float64, ndmin=2)
    columns = tuple(columns)
    trees = Parallel(n_jobs=resolve_threads(n_jobs))(
        delayed(_fit_regression_tree)(y, x, columns, params, arm, b) for b in range(params.b)
    )
    return RegressionForest(trees=tuple(trees), arm=arm, n=int(y.shape[0]))


@dataclass(frozen=True, eq=False)
class SrModel:
    forest1: RegressionForest
    forest0: RegressionForest
    params: ForestParams

    def predict(self, x) -> np.ndarray:
        return self.forest1.predict(x) - self.forest0.predict(x)


def fit_sr(data: TrialDataset, params: ForestParams = ForestParams(), n_jobs: Optional[int] = None) -> SrModel:
    """Fit one regression forest on the treated rows and one on the control rows.

    The arms draw from separate streams keyed by (seed, arm, tree), so either
    forest is unaffected by the other arm's data.
    """
    params.tree.resolve_mtry(data.p)
    treated = data.t == 1
    for arm, mask in ((1, treated), (0, ~treated)):
        size = int(mask.sum())
        if size < params.tree.min_node:
            label = "treated" if arm == 1 else "control"
            raise GrowthError(f"The {label} arm has {size} rows; the regression forest needs at least min_node={params.tree.min_node}")
    logger.info("fitting SR forests: %d treated and %d control rows, B=%d", int(treated.sum()), int((~treated).sum()), params.b)
    forest1 = fit_regression_forest(data.y[treated], data.x[treated], data.columns, params, arm=1, n_jobs=n_jobs)
    forest0 = fit_regression_forest(data.y[~treated], data.x[~treated], data.columns, params, arm=0, n_jobs=n_jobs)
    return SrModel(forest1=forest1, forest0=forest0, params=params)


def predict_sr(model: SrModel, xrow) -> float:
    return float(model.predict(np.asarray(xrow, dtype=np.float64).reshape(1, -1))[0])
