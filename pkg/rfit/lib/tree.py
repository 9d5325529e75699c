"""Single interaction tree: growth on a bootstrap-weighted sample, routing, JSON.

Nodes are stored in preorder in a flat list; internal nodes route a row left
when its value on ``covariate`` is ``<= cutpoint``. Nominal covariates are
split on the ordinal codes of an encoding built once at the root of each tree
(levels ranked by their treatment effect in the weighted sample), so a cut on
a nominal column is a set of levels.

Node counts ``n1``/``n0`` and all statistics use the bootstrap multiplicities
as weights: a row drawn ``w`` times counts as ``w`` rows.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np

from .data import ColumnMeta, NominalEncoding, TrialDataset, encode_nominal
from .errors import ConfigError, DegenerateColumnError, GrowthError, PredictionError
from .splits import SplitCandidate, SplitMethod, SssConfig, greedy_best_cut, sss_best_cut

__all__ = [
    "TreeParams",
    "TreeNode",
    "InteractionTree",
    "terminal_effect",
    "grow_tree",
    "predict_tree",
    "route_rows",
]

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class TreeParams:
    mtry: Optional[int] = None
    min_arm: int = 5
    min_node: int = 20
    max_depth: int = 30
    split_method: SplitMethod = SplitMethod.SSS
    sss: SssConfig = field(default_factory=SssConfig)

    def __post_init__(self):
        object.__setattr__(self, "split_method", SplitMethod.parse(self.split_method))
        if isinstance(self.sss, dict):
            object.__setattr__(self, "sss", SssConfig.from_dict(self.sss))
        if self.min_arm < 1:
            raise ConfigError(f"min_arm must be >= 1, got {self.min_arm}")
        if self.min_node < 2 * self.min_arm:
            raise ConfigError(f"min_node ({self.min_node}) must be at least 2 * min_arm ({2 * self.min_arm})")
        if self.max_depth < 0:
            raise ConfigError(f"max_depth must be >= 0, got {self.max_depth}")
        if self.mtry is not None and self.mtry < 1:
            raise ConfigError(f"mtry must be >= 1, got {self.mtry}")

    def resolve_mtry(self, p: int) -> int:
        m = max(1, p // 3) if self.mtry is None else int(self.mtry)
        if m > p:
            raise ConfigError(f"mtry={m} exceeds the number of covariates ({p})")
        return m

    def to_dict(self) -> dict:
        return {
            "mtry": self.mtry,
            "min_arm": self.min_arm,
            "min_node": self.min_node,
            "max_depth": self.max_depth,
            "split_method": self.split_method.value,
            "sss": self.sss.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TreeParams":
        kw = {k: d[k] for k in ("mtry", "min_arm", "min_node", "max_depth", "split_method") if k in d}
        if "sss" in d:
            kw["sss"] = SssConfig.from_dict(d["sss"])
        return cls(**kw)


@dataclass
class TreeNode:
    depth: int
    value: float
    n1: float
    n0: float
    covariate: int = -1
    cutpoint: float = math.nan
    left: int = -1
    right: int = -1
    q: float = 0.0
    did: float = 0.0

    @property
    def is_leaf(self) -> bool:
        return self.left < 0


def terminal_effect(y, t, weights=None) -> Tuple[float, float, float]:
    """Treated mean minus control mean over the node rows, with the weighted arm counts."""
    y = np.asarray(y, dtype=np.float64)
    treated = np.asarray(t) == 1
    w = np.ones(y.shape[0]) if weights is None else np.asarray(weights, dtype=np.float64)
    w1 = np.where(treated, w, 0.0)
    w0 = np.where(treated, 0.0, w)
    n1, n0 = float(w1.sum()), float(w0.sum())
    if n1 <= 0 or n0 <= 0:
        raise GrowthError(f"Node has an empty arm (treated={n1:g}, control={n0:g})")
    return float((w1 * y).sum() / n1 - (w0 * y).sum() / n0), n1, n0


@dataclass
class InteractionTree:
    nodes: List[TreeNode]
    columns: Tuple[ColumnMeta, ...]
    encodings: Dict[int, NominalEncoding] = field(default_factory=dict)

    @property
    def n_leaves(self) -> int:
        return sum(1 for node in self.nodes if node.is_leaf)

    @property
    def depth(self) -> int:
        return max(node.depth for node in self.nodes)

    def encode(self, x) -> np.ndarray:
        """Map nominal level indices to this tree's ordinal codes; NaN (unseen level) takes the fallback."""
        x = np.array(x, dtype=np.float64, ndmin=2)
        if x.shape[1] != len(self.columns):
            raise PredictionError(f"Rows have {x.shape[1]} covariates; the tree expects {len(self.columns)}")
        for j, enc in self.encodings.items():
            col = x[:, j]
            missing = np.isnan(col)
            ranks = np.asarray(enc.ranks, dtype=np.float64)
            idx = np.where(missing, 0, col).astype(np.int64)
            if (idx < 0).any() or (idx >= ranks.shape[0]).any():
                raise PredictionError(f"Column {self.columns[j].name!r} holds a level index outside its levels")
            x[:, j] = np.where(missing, float(enc.fallback), ranks[idx])
        return x

    def apply(self, x) -> np.ndarray:
        """Index of the terminal node reached by every row."""
        return route_rows(self, self.encode(x))

    def predict(self, x) -> np.ndarray:
        values = np.asarray([node.value for node in self.nodes])
        return values[self.apply(x)]

    def to_dict(self) -> dict:
        names = [c.name for c in self.columns]
        out_nodes = []
        for k, node in enumerate(self.nodes):
            d = {"id": k, "depth": node.depth, "value": node.value, "n1": node.n1, "n0": node.n0}
            if not node.is_leaf:
                d.update(
                    covariate=node.covariate,
                    name=names[node.covariate],
                    cutpoint=node.cutpoint,
                    left=node.left,
                    right=node.right,
                    q=node.q,
                    did=node.did,
                )
                enc = self.encodings.get(node.covariate)
                if enc is not None:
                    d["left_levels"] = [lv for lv, r in zip(enc.levels, enc.ranks) if r <= node.cutpoint]
            out_nodes.append(d)
        return {
            "encodings": {names[j]: enc.to_dict() for j, enc in sorted(self.encodings.items())},
            "nodes": out_nodes,
        }

    @classmethod
    def from_dict(cls, d: dict, columns) -> "InteractionTree":
        columns = tuple(columns)
        index = {c.name: j for j, c in enumerate(columns)}
        nodes = []
        for nd in d["nodes"]:
            nodes.append(
                TreeNode(
                    depth=int(nd["depth"]),
                    value=float(nd["value"]),
                    n1=float(nd["n1"]),
                    n0=float(nd["n0"]),
                    covariate=int(nd.get("covariate", -1)),
                    cutpoint=float(nd["cutpoint"]) if "cutpoint" in nd else math.nan,
                    left=int(nd.get("left", -1)),
                    right=int(nd.get("right", -1)),
                    q=float(nd.get("q", 0.0)),
                    did=float(nd.get("did", 0.0)),
                )
            )
        encodings = {index[name]: NominalEncoding.from_dict(e) for name, e in d.get("encodings", {}).items()}
        return cls(nodes=nodes, columns=columns, encodings=encodings)


def route_rows(tree: InteractionTree, x: np.ndarray) -> np.ndarray:
    """Leaf index per row of an already-encoded matrix (one pass per tree level)."""
    cov = np.asarray([node.covariate for node in tree.nodes], dtype=np.int64)
    cut = np.asarray([node.cutpoint for node in tree.nodes])
    left = np.asarray([node.left for node in tree.nodes], dtype=np.int64)
    right = np.asarray([node.right for node in tree.nodes], dtype=np.int64)
    at = np.zeros(x.shape[0], dtype=np.int64)
    active = np.flatnonzero(left[at] >= 0)
    while active.size:
        node = at[active]
        vals = x[active, cov[node]]
        bad = np.isnan(vals)
        if bad.any():
            j = int(cov[node[bad][0]])
            raise PredictionError(f"Row {int(active[bad][0])} has no value for tested covariate {tree.columns[j].name!r}")
        at[active] = np.where(vals <= cut[node], left[node], right[node])
        active = active[left[at[active]] >= 0]
    return at


def predict_tree(tree: InteractionTree, xrow) -> float:
    return float(tree.predict(np.asarray(xrow, dtype=np.float64).reshape(1, -1))[0])


def _root_encodings(data: TrialDataset, rows: np.ndarray, w: np.ndarray) -> Tuple[np.ndarray, Dict[int, NominalEncoding], List[int]]:
    """Working matrix with nominal columns replaced by ordinal codes; also returns unusable nominal columns."""
    x = np.array(data.x[rows], dtype=np.float64)
    encodings: Dict[int, NominalEncoding] = {}
    dropped = []
    for j, col in enumerate(data.columns):
        if not col.is_nominal:
            continue
        if not col.splittable:
            dropped.append(j)
            continue
        labels = np.asarray(col.levels, dtype=object)[x[:, j].astype(np.int64)]
        try:
            codes, enc = encode_nominal(labels, data.y[rows], data.t[rows], weights=w, levels=col.levels)
        except DegenerateColumnError:
            dropped.append(j)
            continue
        x[:, j] = codes
        encodings[j] = enc
    return x, encodings, dropped


def _best_split(
    x: np.ndarray, y: np.ndarray, t: np.ndarray, w: np.ndarray, features, nominal, params: TreeParams
) -> Optional[SplitCandidate]:
    best: Optional[SplitCandidate] = None
    for j in features:
        col = x[:, j]
        if j in nominal or params.split_method is SplitMethod.GS:
            cand = greedy_best_cut(col, y, t, params.min_arm, weights=w, covariate=j)
        else:
            cand = sss_best_cut(col, y, t, params.sss, min_arm=params.min_arm, weights=w, covariate=j)
        if cand.valid and (best is None or cand.q > best.q):
            best = cand
    return best


def grow_tree(data: TrialDataset, weights, params: TreeParams, rng: np.random.Generator) -> InteractionTree:
    """Grow one interaction tree on the weighted sample.

    At every node ``mtry`` covariates are drawn without replacement and the
    best admissible cut of each is found (GS or SSS, nominal columns always
    by GS); the node splits on the candidate with the largest exact Q, ties
    going to the lower covariate index. A node becomes terminal at
    ``max_depth``, below ``min_node`` weighted rows, when its responses are
    constant or when no admissible cut exists.
    """
    w_all = np.ones(data.n) if weights is None else np.asarray(weights, dtype=np.float64)
    if w_all.shape[0] != data.n:
        raise GrowthError(f"weights has {w_all.shape[0]} entries for {data.n} rows")
    rows = np.flatnonzero(w_all > 0)
    w = w_all[rows]
    y = np.asarray(data.y[rows], dtype=np.float64)
    t = np.asarray(data.t[rows])

    n1 = float(w[t == 1].sum())
    n0 = float(w[t == 0].sum())
    for arm, count in (("treated", n1), ("control", n0)):
        if count < params.min_arm:
            raise GrowthError(f"Root has {count:g} {arm} rows; min_arm requires at least {params.min_arm}")

    x, encodings, dropped = _root_encodings(data, rows, w)
    nominal = set(encodings)
    p = data.p
    mtry = params.resolve_mtry(p)
    usable = np.asarray([j for j in range(p) if j not in dropped], dtype=np.int64)

    nodes: List[TreeNode] = []
    # (parent, is_left, local rows, depth); right pushed first so left children come next in preorder
    stack = [(-1, True, np.arange(rows.shape[0]), 0)]
    while stack:
        parent, is_left, idx, depth = stack.pop()
        effect, nn1, nn0 = terminal_effect(y[idx], t[idx], w[idx])
        node_id = len(nodes)
        nodes.append(TreeNode(depth=depth, value=effect, n1=nn1, n0=nn0))
        if parent >= 0:
            if is_left:
                nodes[parent].left = node_id
            else:
                nodes[parent].right = node_id

        if depth >= params.max_depth or nn1 + nn0 < params.min_node or usable.size == 0:
            continue
        yn = y[idx]
        if yn.max() == yn.min():
            continue
        drawn = rng.choice(p, size=mtry, replace=False)
        features = [int(j) for j in np.sort(drawn) if j not in dropped]
        best = _best_split(x[idx], yn, t[idx], w[idx], features, nominal, params)
        if best is None:
            continue

        go_left = x[idx, best.covariate] <= best.cutpoint
        node = nodes[node_id]
        node.covariate = best.covariate
        node.cutpoint = best.cutpoint
        node.q = best.q
        node.did = best.did
        stack.append((node_id, False, idx[~go_left], depth + 1))
        stack.append((node_id, True, idx[go_left], depth + 1))

    tree = InteractionTree(nodes=nodes, columns=data.columns, encodings=encodings)
    logger.debug("grew tree: %d nodes, %d leaves, depth %d", len(nodes), tree.n_leaves, tree.depth)
    return tree
