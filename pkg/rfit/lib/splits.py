"""Interaction splitting statistic and best-cut search.

A cut ``c`` on covariate ``x`` sends rows with ``x <= c`` to the left child.
Each cut induces a 2 x 2 table (arm x child) of counts and response sums; the
statistic Q(c) is the squared difference in differences of the four cell
means, scaled by the pooled variance (the Wald statistic for the
treatment-by-split interaction).

Two searches are provided:

* greedy search (GS): exact Q at every midpoint between consecutive distinct
  values. ``greedy_best_cut`` sorts once and keeps running cell sums;
  ``greedy_best_cut_naive`` recomputes the table for every cut and serves as
  the oracle and the timing baseline.
* smooth sigmoid surrogate (SSS): the indicator is replaced by a logistic
  curve so that Q becomes a smooth function of ``c``, which is maximized by
  Brent's bounded scalar method on the standardized covariate.

All functions accept optional nonnegative ``weights``; a weight ``w`` counts
the row ``w`` times (bootstrap multiplicities). Zero-weight rows are ignored.
"""

import enum
import logging
from dataclasses import dataclass
from typing import Callable, Optional, Tuple

import numpy as np
from scipy.optimize import minimize_scalar
from scipy.special import expit as _expit

from .errors import ConfigError, DomainError

__all__ = [
    "SplitMethod",
    "NodeTable",
    "SplitCandidate",
    "SssConfig",
    "SssPrecomp",
    "BrentResult",
    "node_table",
    "pooled_sigma2",
    "q_statistic",
    "greedy_best_cut",
    "greedy_best_cut_naive",
    "expit",
    "sss_precompute",
    "sss_objective",
    "brent_maximize",
    "sss_best_cut",
    "q_profile",
]

logger = logging.getLogger(__name__)

DEFAULT_MIN_ARM = 5

# residual sum of squares at or below this fraction of the node's total sum of
# squares counts as zero (pure cells)
_PURE_TOL = 1e-12


class SplitMethod(str, enum.Enum):
    GS = "GS"
    SSS = "SSS"

    @classmethod
    def parse(cls, value) -> "SplitMethod":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).upper())
        except ValueError:
            raise ConfigError(f"split method must be GS or SSS, got {value!r}")


@dataclass(frozen=True)
class NodeTable:
    n0L: float
    n0R: float
    n1L: float
    n1R: float
    s0L: float
    s0R: float
    s1L: float
    s1R: float
    sumYsq: float

    @property
    def n(self) -> float:
        return self.n0L + self.n0R + self.n1L + self.n1R

    @property
    def counts(self) -> Tuple[float, float, float, float]:
        return self.n0L, self.n0R, self.n1L, self.n1R

    def cell_mean(self, arm: int, side: str) -> Optional[float]:
        n = getattr(self, f"n{arm}{side}")
        s = getattr(self, f"s{arm}{side}")
        return s / n if n > 0 else None


@dataclass(frozen=True)
class SplitCandidate:
    covariate: int
    cutpoint: Optional[float]
    q: float
    did: float
    method: SplitMethod
    valid: bool
    # Brent iterations (SSS only) and the surrogate objective at the optimum
    iterations: int = 0
    converged: bool = True
    surrogate_q: Optional[float] = None

    @classmethod
    def invalid(cls, covariate: int, method: SplitMethod, cutpoint: Optional[float] = None, **kw) -> "SplitCandidate":
        return cls(covariate=covariate, cutpoint=cutpoint, q=0.0, did=0.0, method=method, valid=False, **kw)


@dataclass(frozen=True)
class SssConfig:
    a: float = 10.0
    brent_tol: float = 1e-4
    brent_max_iter: int = 100
    cell_floor: float = 1.0

    def __post_init__(self):
        if not (1.0 <= self.a <= 1000.0):
            raise ConfigError(f"SSS shape parameter a must lie in [1, 1000], got {self.a}")
        if not self.brent_tol > 0:
            raise ConfigError(f"brent_tol must be > 0, got {self.brent_tol}")
        if self.brent_max_iter < 1:
            raise ConfigError(f"brent_max_iter must be >= 1, got {self.brent_max_iter}")

    def to_dict(self) -> dict:
        return {"a": self.a, "brent_tol": self.brent_tol, "brent_max_iter": self.brent_max_iter, "cell_floor": self.cell_floor}

    @classmethod
    def from_dict(cls, d: dict) -> "SssConfig":
        return cls(**{k: d[k] for k in ("a", "brent_tol", "brent_max_iter", "cell_floor") if k in d})


@dataclass(frozen=True)
class SssPrecomp:
    """Node totals that do not depend on the cut."""

    n0: float
    n1: float
    s0: float
    s1: float
    sumYsq: float

    @property
    def n(self) -> float:
        return self.n0 + self.n1


@dataclass(frozen=True)
class BrentResult:
    argmax: float
    value: float
    iterations: int
    converged: bool


# ---------------------------------------------------------------------
# Exact statistic
# ---------------------------------------------------------------------

def _weights(n: int, weights) -> np.ndarray:
    if weights is None:
        return np.ones(n)
    w = np.asarray(weights, dtype=np.float64)
    if w.shape[0] != n:
        raise DomainError(f"weights has {w.shape[0]} entries for {n} rows")
    return w


def node_table(y, t, in_left, weights=None) -> NodeTable:
    """Exact cell counts and response sums for a given left/right assignment."""
    y = np.asarray(y, dtype=np.float64)
    t = np.asarray(t)
    left = np.asarray(in_left).astype(bool)
    if not (y.shape[0] == t.shape[0] == left.shape[0]):
        raise DomainError("y, t and in_left must have the same length")
    w = _weights(y.shape[0], weights)
    treated = t == 1
    wy = w * y
    cells = {}
    for arm, arm_mask in (("0", ~treated), ("1", treated)):
        for side, side_mask in (("L", left), ("R", ~left)):
            m = arm_mask & side_mask
            cells[f"n{arm}{side}"] = float(w[m].sum())
            cells[f"s{arm}{side}"] = float(wy[m].sum())
    return NodeTable(sumYsq=float((wy * y).sum()), **cells)


def _q_cells(n0L, n0R, n1L, n1R, s0L, s0R, s1L, s1R, sumYsq, min_arm: float = 1.0):
    """Vectorized Q, DID and pooled variance; ``valid`` marks admissible cuts."""
    n0L, n0R, n1L, n1R = (np.asarray(v, dtype=np.float64) for v in (n0L, n0R, n1L, n1R))
    s0L, s0R, s1L, s1R = (np.asarray(v, dtype=np.float64) for v in (s0L, s0R, s1L, s1R))
    n = n0L + n0R + n1L + n1R
    with np.errstate(divide="ignore", invalid="ignore"):
        m0L, m0R, m1L, m1R = s0L / n0L, s0R / n0R, s1L / n1L, s1R / n1R
        did = (m1L - m0L) - (m1R - m0R)
        fitted = s0L * m0L + s0R * m0R + s1L * m1L + s1R * m1R
        rss = sumYsq - fitted
        total = s0L + s0R + s1L + s1R
        total_ss = sumYsq - total * total / n
        sigma2 = rss / (n - 4.0)
        inv = 1.0 / n0L + 1.0 / n0R + 1.0 / n1L + 1.0 / n1R
        q = did * did / (sigma2 * inv)
    smallest = np.minimum(np.minimum(n0L, n0R), np.minimum(n1L, n1R))
    valid = (smallest >= min_arm) & (smallest > 0) & (n > 4.0) & (rss > _PURE_TOL * total_ss) & (total_ss > 0)
    return q, did, sigma2, valid


def pooled_sigma2(table: NodeTable, node_n: Optional[float] = None) -> Optional[float]:
    """Pooled within-cell variance; None signals an invalid split (n <= 4 or an empty cell)."""
    n = table.n if node_n is None else float(node_n)
    if n <= 4 or min(table.counts) <= 0:
        return None
    fitted = sum(
        getattr(table, f"s{arm}{side}") ** 2 / getattr(table, f"n{arm}{side}") for arm in "01" for side in "LR"
    )
    return max((table.sumYsq - fitted) / (n - 4.0), 0.0)


def q_statistic(table: NodeTable, sigma2: Optional[float]) -> Optional[float]:
    """Q for one table; None signals an invalid split (empty cell or sigma2 <= 0)."""
    if sigma2 is None or sigma2 <= 0 or min(table.counts) <= 0:
        return None
    did = (table.s1L / table.n1L - table.s0L / table.n0L) - (table.s1R / table.n1R - table.s0R / table.n0R)
    inv = 1.0 / table.n1L + 1.0 / table.n0L + 1.0 / table.n1R + 1.0 / table.n0R
    return did * did / (sigma2 * inv)


# ---------------------------------------------------------------------
# Greedy search
# ---------------------------------------------------------------------

def _prepare(x, y, t, weights):
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    t = np.asarray(t)
    w = _weights(x.shape[0], weights)
    if weights is not None:
        keep = w > 0
        if not keep.all():
            x, y, t, w = x[keep], y[keep], t[keep], w[keep]
    return x, y, t, w


def greedy_best_cut(x, y, t, min_arm: int = DEFAULT_MIN_ARM, weights=None, covariate: int = -1) -> SplitCandidate:
    """Exact best cut by one sort and running cell sums (linear after the sort).

    Ties in Q go to the smallest cutpoint.
    """
    x, y, t, w = _prepare(x, y, t, weights)
    if x.shape[0] < 2:
        return SplitCandidate.invalid(covariate, SplitMethod.GS)
    order = np.argsort(x, kind="stable")
    xs = x[order]
    boundary = np.flatnonzero(xs[1:] > xs[:-1])
    if boundary.size == 0:
        return SplitCandidate.invalid(covariate, SplitMethod.GS)

    ws, ys, treated = w[order], y[order], t[order] == 1
    w1 = np.where(treated, ws, 0.0)
    w0 = np.where(treated, 0.0, ws)
    c1, c0 = np.cumsum(w1), np.cumsum(w0)
    s1, s0 = np.cumsum(w1 * ys), np.cumsum(w0 * ys)
    n1, n0, S1, S0 = c1[-1], c0[-1], s1[-1], s0[-1]
    sum_ysq = float((ws * ys * ys).sum())

    n1L, n0L, s1L, s0L = c1[boundary], c0[boundary], s1[boundary], s0[boundary]
    q, did, _, valid = _q_cells(n0L, n0 - n0L, n1L, n1 - n1L, s0L, S0 - s0L, s1L, S1 - s1L, sum_ysq, min_arm)
    if not valid.any():
        return SplitCandidate.invalid(covariate, SplitMethod.GS)
    q = np.where(valid, q, -np.inf)
    best = int(np.argmax(q))
    i = boundary[best]
    return SplitCandidate(
        covariate=covariate,
        cutpoint=float(0.5 * (xs[i] + xs[i + 1])),
        q=float(q[best]),
        did=float(did[best]),
        method=SplitMethod.GS,
        valid=True,
    )


def greedy_best_cut_naive(x, y, t, min_arm: int = DEFAULT_MIN_ARM, weights=None, covariate: int = -1) -> SplitCandidate:
    """Exact best cut recomputing the whole 2 x 2 table at every candidate (O(K n))."""
    x, y, t, w = _prepare(x, y, t, weights)
    values = np.unique(x)
    if values.size < 2:
        return SplitCandidate.invalid(covariate, SplitMethod.GS)
    best: Optional[SplitCandidate] = None
    for lo, hi in zip(values[:-1], values[1:]):
        c = 0.5 * (lo + hi)
        tab = node_table(y, t, x <= c, w)
        q, did, _, valid = _q_cells(
            tab.n0L, tab.n0R, tab.n1L, tab.n1R, tab.s0L, tab.s0R, tab.s1L, tab.s1R, tab.sumYsq, min_arm
        )
        if not bool(valid):
            continue
        if best is None or float(q) > best.q:
            best = SplitCandidate(covariate, float(c), float(q), float(did), SplitMethod.GS, True)
    return best if best is not None else SplitCandidate.invalid(covariate, SplitMethod.GS)


# ---------------------------------------------------------------------
# Smooth sigmoid surrogate
# ---------------------------------------------------------------------

def expit(x, a: float, c: float):
    """Logistic curve 1 / (1 + exp(-a (x - c))); saturates to 0/1 without overflow."""
    if not a > 0:
        raise ConfigError(f"a must be > 0, got {a}")
    return _expit(a * (np.asarray(x, dtype=np.float64) - c))


def sss_precompute(y, t, weights=None) -> SssPrecomp:
    y = np.asarray(y, dtype=np.float64)
    treated = np.asarray(t) == 1
    w = _weights(y.shape[0], weights)
    w1 = np.where(treated, w, 0.0)
    w0 = np.where(treated, 0.0, w)
    return SssPrecomp(
        n0=float(w0.sum()),
        n1=float(w1.sum()),
        s0=float((w0 * y).sum()),
        s1=float((w1 * y).sum()),
        sumYsq=float((w * y * y).sum()),
    )


class _Surrogate:
    """Q~(c) for one node and covariate, with the cut-free parts computed once."""

    def __init__(self, x_std, y, t, config: SssConfig, precomp: SssPrecomp, weights=None):
        y = np.asarray(y, dtype=np.float64)
        treated = np.asarray(t) == 1
        w = _weights(y.shape[0], weights)
        w1 = np.where(treated, w, 0.0)
        w0 = np.where(treated, 0.0, w)
        self.x = np.asarray(x_std, dtype=np.float64)
        # columns: treated weight, control weight, treated y-sum, control y-sum
        self.m = np.column_stack((w1, w0, w1 * y, w0 * y))
        self.a = float(config.a)
        self.floor = float(config.cell_floor)
        self.pre = precomp
        self.evaluations = 0

    def __call__(self, c: float) -> float:
        self.evaluations += 1
        # left membership, the smooth version of I(x <= c)
        s = _expit(self.a * (c - self.x))
        n1L, n0L, s1L, s0L = s @ self.m
        pre = self.pre
        n1R, n0R = pre.n1 - n1L, pre.n0 - n0L
        s1R, s0R = pre.s1 - s1L, pre.s0 - s0L
        n = pre.n
        if n <= 4.0 or min(n1L, n0L, n1R, n0R) < self.floor:
            return 0.0
        m1L, m0L, m1R, m0R = s1L / n1L, s0L / n0L, s1R / n1R, s0R / n0R
        rss = pre.sumYsq - (s1L * m1L + s0L * m0L + s1R * m1R + s0R * m0R)
        sigma2 = rss / (n - 4.0)
        if not sigma2 > 0:
            return 0.0
        did = (m1L - m0L) - (m1R - m0R)
        inv = 1.0 / n1L + 1.0 / n0L + 1.0 / n1R + 1.0 / n0R
        return float(did * did / (sigma2 * inv))


def sss_objective(c: float, x_std, y, t, config: SssConfig, precomp: Optional[SssPrecomp] = None, weights=None) -> float:
    """Surrogate statistic Q~(c) on the standardized covariate.

    Cell counts and sums are replaced by their logistic-weighted versions;
    right-hand cells come from the node totals in ``precomp``. Returns 0 when
    any smoothed cell count falls below ``config.cell_floor``.
    """
    if precomp is None:
        precomp = sss_precompute(y, t, weights)
    return _Surrogate(x_std, y, t, config, precomp, weights)(c)


def brent_maximize(
    f: Callable[[float], float], lo: float, hi: float, tol: float = 1e-4, max_iter: int = 100
) -> BrentResult:
    """Single-start bounded Brent search (golden section + parabolic steps) for a local maximum."""
    if not lo < hi:
        if lo == hi:
            return BrentResult(argmax=float(lo), value=float(f(lo)), iterations=0, converged=True)
        raise ConfigError(f"brent_maximize needs lo < hi, got [{lo}, {hi}]")
    res = minimize_scalar(
        lambda c: -f(c), bounds=(lo, hi), method="bounded", options={"xatol": tol, "maxiter": max_iter}
    )
    converged = bool(res.status == 0)
    if not converged:
        logger.warning("Brent search stopped after %d iterations without meeting tol=%g on [%g, %g]", res.nit, tol, lo, hi)
    return BrentResult(argmax=float(res.x), value=float(-res.fun), iterations=int(res.nit), converged=converged)


def _standardize_weighted(x: np.ndarray, w: np.ndarray) -> Tuple[np.ndarray, float, float]:
    total = w.sum()
    mean = float((w * x).sum() / total)
    var = float((w * (x - mean) ** 2).sum() / (total - 1.0)) if total > 1 else 0.0
    sd = var ** 0.5
    return (x - mean) / sd if sd > 0 else x - mean, mean, sd


def _admissible_range(
    x: np.ndarray, treated: np.ndarray, w: np.ndarray, min_arm: int
) -> Optional[Tuple[float, float]]:
    """Cut range leaving at least ``min_arm`` weight of each arm on each side.

    A row of weight k counts as k rows, so the bounds are the weighted order
    statistics read off the cumulative weights of each sorted arm.
    """
    lo, hi = -np.inf, np.inf
    for mask in (treated, ~treated):
        xs, ws = x[mask], w[mask]
        if ws.sum() < 2 * min_arm:
            return None
        order = np.argsort(xs, kind="stable")
        xs, ws = xs[order], ws[order]
        lo = max(lo, float(xs[np.searchsorted(np.cumsum(ws), min_arm)]))
        hi = min(hi, float(xs[::-1][np.searchsorted(np.cumsum(ws[::-1]), min_arm)]))
    if not lo < hi:
        return None
    return lo, hi


def sss_best_cut(
    x, y, t, config: SssConfig = SssConfig(), min_arm: Optional[int] = None, weights=None, covariate: int = -1
) -> SplitCandidate:
    """Best cut by maximizing the surrogate, reported with its exact Q.

    The covariate is standardized with the node's own mean and sd, Q~ is
    maximized over the standardized range (narrowed to the cuts that keep
    ``min_arm`` rows per cell when ``min_arm`` is given) and the optimum is
    mapped back to the original scale. Q and DID are then recomputed at the
    hard threshold so SSS and GS candidates compare on one scale.
    """
    x, y, t, w = _prepare(x, y, t, weights)
    if x.shape[0] < 2 or not (x.max() > x.min()):
        return SplitCandidate.invalid(covariate, SplitMethod.SSS)
    x_std, mean, sd = _standardize_weighted(x, w)
    if min_arm is None:
        lo, hi = float(x_std.min()), float(x_std.max())
    else:
        bounds = _admissible_range(x_std, np.asarray(t) == 1, w, min_arm)
        if bounds is None:
            return SplitCandidate.invalid(covariate, SplitMethod.SSS)
        lo, hi = bounds

    surrogate = _Surrogate(x_std, y, t, config, sss_precompute(y, t, w), w)
    found = brent_maximize(surrogate, lo, hi, config.brent_tol, config.brent_max_iter)
    cut = found.argmax * sd + mean

    tab = node_table(y, t, x <= cut, w)
    q, did, _, valid = _q_cells(
        tab.n0L, tab.n0R, tab.n1L, tab.n1R, tab.s0L, tab.s0R, tab.s1L, tab.s1R, tab.sumYsq,
        1 if min_arm is None else min_arm,
    )
    extra = dict(iterations=found.iterations, converged=found.converged, surrogate_q=found.value)
    if not bool(valid):
        return SplitCandidate.invalid(covariate, SplitMethod.SSS, cutpoint=float(cut), **extra)
    return SplitCandidate(
        covariate=covariate, cutpoint=float(cut), q=float(q), did=float(did), method=SplitMethod.SSS, valid=True, **extra
    )


def q_profile(x, y, t, cuts, a: Optional[float] = None, weights=None) -> Tuple[np.ndarray, Optional[np.ndarray]]:
    """Exact Q at each cut (NaN where inadmissible) and, when ``a`` is given, Q~ at the same cuts.

    Q~ is evaluated on the node-standardized covariate with the cuts mapped
    onto that scale, i.e. exactly the function SSS maximizes.
    """
    x, y, t, w = _prepare(x, y, t, weights)
    cuts = np.asarray(cuts, dtype=np.float64)
    exact = np.full(cuts.shape[0], np.nan)
    for k, c in enumerate(cuts):
        tab = node_table(y, t, x <= c, w)
        q, _, _, valid = _q_cells(
            tab.n0L, tab.n0R, tab.n1L, tab.n1R, tab.s0L, tab.s0R, tab.s1L, tab.s1R, tab.sumYsq
        )
        if bool(valid):
            exact[k] = float(q)
    if a is None:
        return exact, None
    x_std, mean, sd = _standardize_weighted(x, w)
    if not sd > 0:
        return exact, np.zeros(cuts.shape[0])
    surrogate = _Surrogate(x_std, y, t, SssConfig(a=a), sss_precompute(y, t, w), w)
    smooth = np.asarray([surrogate((c - mean) / sd) for c in cuts])
    return exact, smooth
