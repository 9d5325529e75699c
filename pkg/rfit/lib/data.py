"""Trial dataset representation, CSV ingestion, standardization and nominal encoding.

Covariates live in one float matrix. Continuous columns hold their values;
nominal columns hold the index of the level in ``ColumnMeta.levels`` (levels
sorted lexicographically), or NaN for a label the metadata has never seen.
"""

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from .errors import (
    ConfigError,
    DegenerateColumnError,
    DomainError,
    MissingValueError,
    ParseError,
    SchemaError,
    UnseenLevelError,
)
from .utils import load_json

__all__ = [
    "CONTINUOUS",
    "NOMINAL",
    "ColumnMeta",
    "SchemaConfig",
    "TrialDataset",
    "NominalEncoding",
    "load_csv",
    "load_covariates",
    "write_csv",
    "standardize_column",
    "encode_nominal",
    "order_levels_by_mean",
]

logger = logging.getLogger(__name__)

CONTINUOUS = "continuous"
NOMINAL = "nominal"

ON_MISSING = ("error", "drop")
ON_UNSEEN = ("error", "nearest")

# rows listed in a missing-value report before it is truncated
_MAX_REPORTED_ROWS = 20


@dataclass(frozen=True)
class ColumnMeta:
    name: str
    kind: str = CONTINUOUS
    levels: Optional[Tuple[str, ...]] = None
    mean: float = 0.0
    sd: float = 0.0

    def __post_init__(self):
        if self.kind not in (CONTINUOUS, NOMINAL):
            raise ConfigError(f"Column {self.name!r}: unknown kind {self.kind!r}")
        if self.kind == NOMINAL:
            if not self.levels:
                raise ConfigError(f"Nominal column {self.name!r} has no levels")
        elif self.sd < 0:
            raise ConfigError(f"Column {self.name!r}: sd must be >= 0")

    @property
    def is_nominal(self) -> bool:
        return self.kind == NOMINAL

    @property
    def splittable(self) -> bool:
        return not self.is_nominal or len(self.levels) >= 2

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "kind": self.kind,
            "levels": list(self.levels) if self.levels is not None else None,
            "mean": self.mean,
            "sd": self.sd,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ColumnMeta":
        levels = d.get("levels")
        return cls(
            name=d["name"],
            kind=d.get("kind", CONTINUOUS),
            levels=tuple(levels) if levels is not None else None,
            mean=float(d.get("mean") or 0.0),
            sd=float(d.get("sd") or 0.0),
        )


@dataclass(frozen=True)
class SchemaConfig:
    """Which CSV columns play which role.

    An empty ``covariates`` list means "every column that is not the
    response, the treatment, the id or listed in ``exclude``".
    """

    response: str
    treatment: str
    covariates: Tuple[str, ...] = ()
    nominal: Tuple[str, ...] = ()
    on_missing: str = "error"
    id: Optional[str] = None
    exclude: Tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "covariates", tuple(self.covariates))
        object.__setattr__(self, "nominal", tuple(self.nominal))
        object.__setattr__(self, "exclude", tuple(self.exclude))
        if not self.response or not self.treatment:
            raise SchemaError("Schema must name a response column and a treatment column")
        if self.response == self.treatment:
            raise SchemaError(f"Response and treatment cannot be the same column ({self.response!r})")
        if self.on_missing not in ON_MISSING:
            raise SchemaError(f"on_missing must be one of {ON_MISSING}, got {self.on_missing!r}")
        dupes = sorted({c for c in self.covariates if self.covariates.count(c) > 1})
        if dupes:
            raise SchemaError(f"Duplicate covariates in schema: {', '.join(dupes)}")
        reserved = {self.response, self.treatment} | ({self.id} if self.id else set())
        clash = sorted(reserved & set(self.covariates))
        if clash:
            raise SchemaError(f"Columns cannot be both covariate and response/treatment/id: {', '.join(clash)}")
        if self.covariates:
            stray = sorted(set(self.nominal) - set(self.covariates))
            if stray:
                raise SchemaError(f"Nominal columns not listed as covariates: {', '.join(stray)}")

    def resolve_covariates(self, header: Sequence[str]) -> Tuple[str, ...]:
        if self.covariates:
            return self.covariates
        skip = {self.response, self.treatment, self.id} | set(self.exclude)
        return tuple(h for h in header if h not in skip)

    def to_dict(self) -> dict:
        return {
            "response": self.response,
            "treatment": self.treatment,
            "covariates": list(self.covariates),
            "nominal": list(self.nominal),
            "on_missing": self.on_missing,
            "id": self.id,
            "exclude": list(self.exclude),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SchemaConfig":
        unknown = sorted(set(d) - {"response", "treatment", "covariates", "nominal", "on_missing", "id", "exclude"})
        if unknown:
            raise SchemaError(f"Unknown schema keys: {', '.join(unknown)}")
        if "response" not in d or "treatment" not in d:
            raise SchemaError("Schema must contain 'response' and 'treatment'")
        return cls(
            response=d["response"],
            treatment=d["treatment"],
            covariates=tuple(d.get("covariates") or ()),
            nominal=tuple(d.get("nominal") or ()),
            on_missing=d.get("on_missing") or "error",
            id=d.get("id"),
            exclude=tuple(d.get("exclude") or ()),
        )

    @classmethod
    def from_json(cls, path) -> "SchemaConfig":
        try:
            return cls.from_dict(load_json(path))
        except ConfigError as e:
            raise SchemaError(str(e))


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.array(a, order="C", copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class TrialDataset:
    """Responses ``y``, 0/1 treatment ``t`` and covariate matrix ``x`` (n x p).

    Immutable after construction; arrays are flagged read-only so the same
    object can be handed to many tree builders.
    """

    y: np.ndarray
    t: np.ndarray
    x: np.ndarray
    columns: Tuple[ColumnMeta, ...]
    row_ids: Optional[np.ndarray] = field(default=None)

    def __post_init__(self):
        y = np.asarray(self.y, dtype=np.float64).reshape(-1)
        t = np.asarray(self.t)
        x = np.asarray(self.x, dtype=np.float64)
        if x.ndim == 1:
            x = x.reshape(-1, 1)
        n = y.shape[0]
        if n < 2:
            raise DomainError(f"A trial dataset needs at least 2 rows, got {n}")
        if t.shape[0] != n or x.shape[0] != n:
            raise DomainError(f"Length mismatch: y has {n} rows, t has {t.shape[0]}, x has {x.shape[0]}")
        if x.shape[1] != len(self.columns):
            raise DomainError(f"x has {x.shape[1]} columns but {len(self.columns)} column descriptions were given")
        bad = ~np.isin(t, (0, 1))
        if bad.any():
            i = int(np.flatnonzero(bad)[0])
            raise DomainError(f"Treatment values must be 0 or 1; row {i} has {t[i]!r}")
        t = t.astype(np.int8)
        n1 = int(t.sum())
        if n1 == 0 or n1 == n:
            raise DomainError(f"Both arms must be nonempty (treated={n1}, control={n - n1})")
        if not np.isfinite(y).all():
            raise DomainError("Responses must be finite")
        cont = [j for j, c in enumerate(self.columns) if not c.is_nominal]
        if cont and not np.isfinite(x[:, cont]).all():
            raise DomainError("Continuous covariates must be finite")
        for j, c in enumerate(self.columns):
            if c.is_nominal:
                codes = x[:, j]
                if not (np.isfinite(codes).all() and (codes >= 0).all() and (codes < len(c.levels)).all()):
                    raise DomainError(f"Nominal column {c.name!r} holds codes outside its {len(c.levels)} levels")
        row_ids = self.row_ids
        if row_ids is None:
            row_ids = np.arange(n)
        row_ids = np.asarray(row_ids)
        if row_ids.shape[0] != n:
            raise DomainError("row_ids must have one entry per row")
        object.__setattr__(self, "y", _readonly(y))
        object.__setattr__(self, "t", _readonly(t))
        object.__setattr__(self, "x", _readonly(x))
        object.__setattr__(self, "columns", tuple(self.columns))
        object.__setattr__(self, "row_ids", _readonly(row_ids))

    @property
    def n(self) -> int:
        return int(self.y.shape[0])

    @property
    def p(self) -> int:
        return int(self.x.shape[1])

    @property
    def names(self) -> List[str]:
        return [c.name for c in self.columns]

    def labels(self, j: int) -> np.ndarray:
        """Level labels of nominal column ``j`` (object array)."""
        col = self.columns[j]
        if not col.is_nominal:
            raise ConfigError(f"Column {col.name!r} is not nominal")
        levels = np.asarray(col.levels, dtype=object)
        return levels[self.x[:, j].astype(np.int64)]

    def subset(self, rows) -> "TrialDataset":
        rows = np.asarray(rows)
        return TrialDataset(
            y=self.y[rows], t=self.t[rows], x=self.x[rows], columns=self.columns, row_ids=self.row_ids[rows]
        )

    def mean_difference(self) -> float:
        """Unadjusted treated-minus-control mean response."""
        treated = self.t == 1
        return float(self.y[treated].mean() - self.y[~treated].mean())


@dataclass(frozen=True)
class NominalEncoding:
    """Ranks of a nominal column's levels, ordered by a per-level score.

    ``ranks[k]`` is the ordinal code of ``levels[k]``; levels without
    observations take the rank whose score is nearest the pooled score
    (``fallback``), which is also where unseen labels go under "nearest".
    """

    levels: Tuple[str, ...]
    scores: Tuple[float, ...]
    ranks: Tuple[int, ...]
    fallback: int

    def transform(self, labels, on_unseen: str = "error") -> np.ndarray:
        if on_unseen not in ON_UNSEEN:
            raise ConfigError(f"on_unseen must be one of {ON_UNSEEN}, got {on_unseen!r}")
        lookup = dict(zip(self.levels, self.ranks))
        out = np.empty(len(labels), dtype=np.float64)
        for i, label in enumerate(labels):
            code = lookup.get(label)
            if code is None:
                if on_unseen == "error":
                    raise UnseenLevelError(f"Level {label!r} was not seen when the encoding was built")
                code = self.fallback
            out[i] = code
        return out

    def to_dict(self) -> dict:
        return {
            "levels": list(self.levels),
            "scores": [None if not np.isfinite(s) else float(s) for s in self.scores],
            "ranks": list(self.ranks),
            "fallback": self.fallback,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "NominalEncoding":
        return cls(
            levels=tuple(d["levels"]),
            scores=tuple(np.nan if s is None else float(s) for s in d["scores"]),
            ranks=tuple(int(r) for r in d["ranks"]),
            fallback=int(d["fallback"]),
        )


# ---------------------------------------------------------------------
# Standardization
# ---------------------------------------------------------------------

def standardize_column(values) -> Tuple[np.ndarray, float, float]:
    """Return ((v - mean) / sd, mean, sd) with the sample (n - 1) sd.

    Raises DegenerateColumnError for a constant column.
    """
    v = np.asarray(values, dtype=np.float64)
    if v.shape[0] < 2:
        raise DegenerateColumnError("Cannot standardize fewer than 2 values")
    mean = float(v.mean())
    sd = float(v.std(ddof=1))
    if not sd > 0.0:
        raise DegenerateColumnError("Column is constant (sd = 0)")
    return (v - mean) / sd, mean, sd


# ---------------------------------------------------------------------
# Nominal encoding
# ---------------------------------------------------------------------

def _rank_levels(levels, scores, present, pooled: float) -> Tuple[Tuple[int, ...], int]:
    order = sorted((k for k in range(len(levels)) if present[k]), key=lambda k: (scores[k], levels[k]))
    ranks = [0] * len(levels)
    for r, k in enumerate(order):
        ranks[k] = r
    sorted_scores = np.asarray([scores[k] for k in order])
    fallback = int(np.argmin(np.abs(sorted_scores - pooled)))
    for k in range(len(levels)):
        if not present[k]:
            ranks[k] = fallback
    return tuple(ranks), fallback


def _prepare_levels(labels, levels, weights):
    labels = np.asarray(labels, dtype=object)
    if levels is None:
        levels = tuple(sorted({str(v) for v in labels}))
    else:
        levels = tuple(levels)
    index = {lv: k for k, lv in enumerate(levels)}
    try:
        codes = np.fromiter((index[str(v)] for v in labels), dtype=np.int64, count=len(labels))
    except KeyError as e:
        raise UnseenLevelError(f"Level {e.args[0]!r} is not in the supplied level list")
    w = np.ones(len(labels)) if weights is None else np.asarray(weights, dtype=np.float64)
    return levels, codes, w


def encode_nominal(labels, y, t, weights=None, levels=None) -> Tuple[np.ndarray, NominalEncoding]:
    """Rank levels by their treatment effect (treated mean minus control mean).

    Levels where only one arm is present get the effect of that arm's level
    mean against the other arm's overall mean. Ties are broken by the level
    label. Returns the per-row ordinal codes and the encoding.
    """
    levels, codes, w = _prepare_levels(labels, levels, weights)
    y = np.asarray(y, dtype=np.float64)
    t = np.asarray(t)
    L = len(levels)
    wt = w * (t == 1)
    wc = w * (t == 0)
    n1 = np.bincount(codes, weights=wt, minlength=L)
    n0 = np.bincount(codes, weights=wc, minlength=L)
    s1 = np.bincount(codes, weights=wt * y, minlength=L)
    s0 = np.bincount(codes, weights=wc * y, minlength=L)
    if wt.sum() <= 0 or wc.sum() <= 0:
        raise DegenerateColumnError("Both arms are needed to rank nominal levels")
    mean1 = float((wt * y).sum() / wt.sum())
    mean0 = float((wc * y).sum() / wc.sum())

    scores = np.full(L, np.nan)
    with np.errstate(invalid="ignore", divide="ignore"):
        both = (n1 > 0) & (n0 > 0)
        scores[both] = s1[both] / n1[both] - s0[both] / n0[both]
        only1 = (n1 > 0) & (n0 == 0)
        scores[only1] = s1[only1] / n1[only1] - mean0
        only0 = (n0 > 0) & (n1 == 0)
        scores[only0] = mean1 - s0[only0] / n0[only0]
    present = (n1 + n0) > 0
    if present.sum() < 2:
        raise DegenerateColumnError(f"Nominal column has {int(present.sum())} observed level(s); need 2")

    ranks, fallback = _rank_levels(levels, scores, present, pooled=mean1 - mean0)
    enc = NominalEncoding(levels=levels, scores=tuple(float(s) for s in scores), ranks=ranks, fallback=fallback)
    return np.asarray(ranks, dtype=np.float64)[codes], enc


def order_levels_by_mean(labels, y, weights=None, levels=None) -> Tuple[np.ndarray, NominalEncoding]:
    """Rank levels by mean response, the usual ordering for regression trees."""
    levels, codes, w = _prepare_levels(labels, levels, weights)
    y = np.asarray(y, dtype=np.float64)
    L = len(levels)
    cnt = np.bincount(codes, weights=w, minlength=L)
    tot = np.bincount(codes, weights=w * y, minlength=L)
    present = cnt > 0
    if present.sum() < 2:
        raise DegenerateColumnError(f"Nominal column has {int(present.sum())} observed level(s); need 2")
    scores = np.full(L, np.nan)
    scores[present] = tot[present] / cnt[present]
    pooled = float(tot.sum() / cnt.sum())
    ranks, fallback = _rank_levels(levels, scores, present, pooled=pooled)
    enc = NominalEncoding(levels=levels, scores=tuple(float(s) for s in scores), ranks=ranks, fallback=fallback)
    return np.asarray(ranks, dtype=np.float64)[codes], enc


# ---------------------------------------------------------------------
# CSV ingestion
# ---------------------------------------------------------------------

def _read_frame(path, nominal: Sequence[str]) -> pd.DataFrame:
    path = Path(path).expanduser()
    if not path.exists():
        raise SchemaError(f"CSV file not found: {path}")
    dtypes = {name: str for name in nominal}
    try:
        frame = pd.read_csv(
            path,
            dtype=dtypes,
            keep_default_na=True,
            encoding="utf-8-sig",
            skipinitialspace=False,
            float_precision="round_trip",
        )
    except pd.errors.EmptyDataError:
        raise SchemaError(f"CSV file is empty: {path}")
    frame.columns = [str(c).strip() for c in frame.columns]
    return frame


def _numeric(frame: pd.DataFrame, name: str, role: str, lines: np.ndarray) -> np.ndarray:
    raw = frame[name]
    values = pd.to_numeric(raw, errors="coerce")
    bad = values.isna() & raw.notna()
    if bad.any():
        i = int(np.flatnonzero(bad.to_numpy())[0])
        raise ParseError(
            f"Non-numeric {role} value {raw.iloc[i]!r} in column {name!r} at line {lines[i]}",
            row=int(lines[i]),
            column=name,
        )
    return values.to_numpy(dtype=np.float64)


def _missing_report(frame: pd.DataFrame, used: Sequence[str], lines: np.ndarray) -> Tuple[np.ndarray, str]:
    mask = frame[list(used)].isna()
    rows = mask.any(axis=1).to_numpy()
    if not rows.any():
        return rows, ""
    parts = []
    for i in np.flatnonzero(rows)[:_MAX_REPORTED_ROWS]:
        cols = [c for c in used if mask.iloc[i][c]]
        parts.append(f"line {lines[i]}: {', '.join(cols)}")
    more = int(rows.sum()) - len(parts)
    if more > 0:
        parts.append(f"... and {more} more row(s)")
    return rows, "; ".join(parts)


def load_csv(path, schema: SchemaConfig) -> TrialDataset:
    """Read a trial CSV according to ``schema``; row order is preserved."""
    frame = _read_frame(path, schema.nominal)
    header = list(frame.columns)
    covariates = schema.resolve_covariates(header)
    if not covariates:
        raise SchemaError("Schema selects no covariate columns")
    needed = [schema.response, schema.treatment, *covariates] + ([schema.id] if schema.id else [])
    missing = [c for c in needed if c not in header]
    if missing:
        raise SchemaError(f"Missing column(s) in {path}: {', '.join(missing)}. Available: {', '.join(header)}")
    stray = sorted(set(schema.nominal) - set(covariates))
    if stray:
        raise SchemaError(f"Nominal columns not among covariates: {', '.join(stray)}")

    # header is line 1
    lines = np.arange(2, len(frame) + 2)
    used = [schema.response, schema.treatment, *covariates]
    missing_rows, report = _missing_report(frame, used, lines)
    if missing_rows.any():
        if schema.on_missing == "error":
            raise MissingValueError(
                f"{int(missing_rows.sum())} row(s) with missing values ({report})",
                rows=lines[missing_rows].tolist(),
            )
        logger.info("Dropping %d row(s) with missing values: %s", int(missing_rows.sum()), report)
        frame = frame.loc[~missing_rows].reset_index(drop=True)
        lines = lines[~missing_rows]

    y = _numeric(frame, schema.response, "response", lines)
    t_raw = _numeric(frame, schema.treatment, "treatment", lines)
    bad = ~np.isin(t_raw, (0.0, 1.0))
    if bad.any():
        i = int(np.flatnonzero(bad)[0])
        raise DomainError(
            f"Treatment column {schema.treatment!r} must be 0 or 1; found '{frame[schema.treatment].iloc[i]}' "
            f"at line {lines[i]}"
        )
    t = t_raw.astype(np.int8)

    nominal = set(schema.nominal)
    columns: List[ColumnMeta] = []
    x = np.empty((len(frame), len(covariates)), dtype=np.float64)
    for j, name in enumerate(covariates):
        if name in nominal:
            labels = frame[name].astype(str).str.strip().to_numpy(dtype=object)
            levels = tuple(sorted(set(labels)))
            col = ColumnMeta(name=name, kind=NOMINAL, levels=levels)
            index = {lv: k for k, lv in enumerate(levels)}
            x[:, j] = [index[v] for v in labels]
        else:
            v = _numeric(frame, name, "covariate", lines)
            x[:, j] = v
            sd = float(v.std(ddof=1)) if len(v) > 1 else 0.0
            col = ColumnMeta(name=name, kind=CONTINUOUS, mean=float(v.mean()), sd=sd)
        if not col.splittable or (not col.is_nominal and col.sd == 0):
            logger.warning("Column %r takes a single value; it is kept but never split on", name)
        columns.append(col)

    row_ids = frame[schema.id].to_numpy() if schema.id else None
    data = TrialDataset(y=y, t=t, x=x, columns=tuple(columns), row_ids=row_ids)
    logger.info("Loaded %s: n=%d p=%d (treated=%d)", path, data.n, data.p, int(data.t.sum()))
    return data


def load_covariates(
    path, columns: Sequence[ColumnMeta], on_unseen: str = "error", id_column: Optional[str] = None
) -> Tuple[np.ndarray, np.ndarray]:
    """Read the covariate block of a CSV against fitted column metadata.

    Returns (x, row_ids). Unseen nominal labels raise UnseenLevelError under
    "error" and become NaN under "nearest" (trees route NaN codes to the
    encoding's fallback rank). Missing continuous cells are a ParseError.
    """
    if on_unseen not in ON_UNSEEN:
        raise ConfigError(f"on_unseen must be one of {ON_UNSEEN}, got {on_unseen!r}")
    frame = _read_frame(path, [c.name for c in columns if c.is_nominal])
    header = list(frame.columns)
    missing = [c.name for c in columns if c.name not in header]
    if missing:
        raise SchemaError(f"Missing covariate column(s) in {path}: {', '.join(missing)}")
    lines = np.arange(2, len(frame) + 2)
    x = np.empty((len(frame), len(columns)), dtype=np.float64)
    for j, col in enumerate(columns):
        if col.is_nominal:
            labels = frame[col.name].astype(str).str.strip().to_numpy(dtype=object)
            index = {lv: k for k, lv in enumerate(col.levels)}
            for i, label in enumerate(labels):
                k = index.get(label)
                if k is None:
                    if on_unseen == "error":
                        raise UnseenLevelError(
                            f"Column {col.name!r}: level {label!r} at line {lines[i]} was not seen at fit time"
                        )
                    x[i, j] = np.nan
                else:
                    x[i, j] = k
        else:
            v = _numeric(frame, col.name, "covariate", lines)
            if np.isnan(v).any():
                i = int(np.flatnonzero(np.isnan(v))[0])
                raise ParseError(f"Missing value in column {col.name!r} at line {lines[i]}", row=int(lines[i]), column=col.name)
            x[:, j] = v
    if id_column and id_column in header:
        row_ids = frame[id_column].to_numpy()
    else:
        row_ids = np.arange(len(frame))
    return x, row_ids


def write_csv(data: TrialDataset, path, response: str = "y", treatment: str = "t", id_column: Optional[str] = None) -> None:
    """Write a dataset with full-precision floats; nominal columns are written as labels."""
    out: Dict[str, object] = {}
    if id_column:
        out[id_column] = data.row_ids
    out[response] = data.y
    out[treatment] = data.t.astype(int)
    for j, col in enumerate(data.columns):
        out[col.name] = data.labels(j) if col.is_nominal else data.x[:, j]
    pd.DataFrame(out).to_csv(Path(path), index=False, float_format="%.17g", lineterminator="\n")
