"""Column-typed datasets and CSV ingestion."""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import DataError

NUMERIC = "numeric"
CATEGORICAL = "categorical"
# column written by the simulators; never used as a predictor unless requested
TRUE_F_COLUMN = "true_F"
MISSING_TOKENS = {"", "na", "nan", "null", "none", "?"}


@dataclass(frozen=True)
class Column:
    name: str
    kind: str = NUMERIC
    levels: tuple = ()

    def to_dict(self):
        d = {"name": self.name, "kind": self.kind}
        if self.kind == CATEGORICAL:
            d["levels"] = list(self.levels)
        return d

    @classmethod
    def from_dict(cls, d):
        return cls(d["name"], d["kind"], tuple(d.get("levels", ())))


@dataclass
class Dataset:
    """Predictors ``X`` (n, p), nonnegative response ``y`` and positive weights ``w``.

    Categorical columns of ``X`` hold integer level codes into
    ``columns[j].levels``.
    """

    X: np.ndarray
    y: np.ndarray
    w: np.ndarray
    columns: list = field(default_factory=list)

    def __post_init__(self):
        self.X = np.ascontiguousarray(np.asarray(self.X, dtype=np.float64))
        if self.X.ndim == 1:
            self.X = self.X[:, None]
        n, p = self.X.shape
        self.y = np.asarray(self.y, dtype=np.float64)
        self.w = (np.ones(n) if self.w is None
                  else np.asarray(self.w, dtype=np.float64))
        if not self.columns:
            self.columns = [Column(f"x{j + 1}") for j in range(p)]
        if len(self.columns) != p:
            raise DataError(f"{len(self.columns)} column specs for {p} columns")
        if self.y.shape != (n,) or self.w.shape != (n,):
            raise DataError("y and w must have one entry per row")
        if not np.all(np.isfinite(self.X)):
            raise DataError("predictors contain NaN or infinite values")
        if not np.all(np.isfinite(self.y)) or np.any(self.y < 0):
            raise DataError("response must be finite and nonnegative")
        if not np.all(np.isfinite(self.w)) or np.any(self.w <= 0):
            raise DataError("weights must be finite and positive")
        for j, col in enumerate(self.columns):
            if col.kind == CATEGORICAL:
                codes = self.X[:, j]
                if np.any((codes < 0) | (codes >= len(col.levels))
                          | (codes != np.floor(codes))):
                    raise DataError(f"column {col.name!r} has codes outside its levels")

    @classmethod
    def from_arrays(cls, X, y, w=None, names=None, categorical=()):
        """Build from raw arrays; ``categorical`` names or indexes columns whose
        values are treated as levels (coded in sorted order)."""
        X = np.asarray(X)
        if X.ndim == 1:
            X = X[:, None]
        p = X.shape[1]
        names = list(names) if names is not None else [f"x{j + 1}" for j in range(p)]
        cat = {names.index(c) if isinstance(c, str) else int(c) for c in categorical}
        cols, out = [], np.empty(X.shape, dtype=np.float64)
        for j in range(p):
            if j in cat:
                levels, codes = np.unique(X[:, j], return_inverse=True)
                cols.append(Column(names[j], CATEGORICAL, tuple(levels.tolist())))
                out[:, j] = codes
            else:
                cols.append(Column(names[j]))
                out[:, j] = X[:, j].astype(np.float64)
        return cls(out, y, w, cols)

    @property
    def n(self):
        return self.X.shape[0]

    @property
    def p(self):
        return self.X.shape[1]

    @property
    def names(self):
        return [c.name for c in self.columns]

    @cached_property
    def Xt(self):
        return np.ascontiguousarray(self.X.T)

    @cached_property
    def is_cat(self):
        return np.array([c.kind == CATEGORICAL for c in self.columns], dtype=np.uint8)

    @cached_property
    def n_levels(self):
        return np.array([max(len(c.levels), 1) for c in self.columns], dtype=np.intc)

    @cached_property
    def order(self):
        """Per-feature stable argsort of the predictors."""
        return np.argsort(self.Xt, axis=1, kind="stable").astype(np.intc)

    def subset(self, rows):
        rows = np.asarray(rows)
        return Dataset(self.X[rows], self.y[rows], self.w[rows], list(self.columns))

    def with_columns(self, X, columns):
        return Dataset(X, self.y, self.w, list(columns))

    def feature_index(self, name):
        if isinstance(name, (int, np.integer)):
            if not 0 <= name < self.p:
                raise DataError(f"feature index {name} out of range")
            return int(name)
        try:
            return self.names.index(name)
        except ValueError:
            raise DataError(f"unknown feature {name!r}") from None


def _parse_float(s):
    try:
        v = float(s)
    except ValueError:
        return None
    return v if np.isfinite(v) else None


def encode_columns(raw, columns):
    """Encode raw string columns against an existing schema (unseen levels -> -1)."""
    n = len(raw[0]) if raw else 0
    X = np.empty((n, len(columns)))
    for j, (vals, col) in enumerate(zip(raw, columns)):
        if col.kind == CATEGORICAL:
            lookup = {str(level): k for k, level in enumerate(col.levels)}
            X[:, j] = [lookup.get(v, -1) for v in vals]
        else:
            for i, v in enumerate(vals):
                x = _parse_float(v)
                if x is None:
                    raise DataError(f"row {i + 2}, column {col.name!r}: "
                                    f"cannot parse {v!r} as a number")
                X[i, j] = x
    return X


def read_csv(path):
    """Header plus rows of a CSV file, rejecting ragged rows and missing cells."""
    try:
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            try:
                header = [h.strip() for h in next(reader)]
            except StopIteration:
                raise DataError(f"{path}: empty file") from None
            rows = []
            for lineno, row in enumerate(reader, start=2):
                if not row:
                    continue
                if len(row) != len(header):
                    raise DataError(f"{path}: row {lineno} has {len(row)} fields, "
                                    f"expected {len(header)}")
                for name, cell in zip(header, row):
                    if cell.strip().lower() in MISSING_TOKENS:
                        raise DataError(f"{path}: missing value at row {lineno}, "
                                        f"column {name!r}")
                rows.append([c.strip() for c in row])
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    if len(set(header)) != len(header):
        raise DataError(f"{path}: duplicate column names")
    return header, rows


def ingest_csv(path, response, weight=None, categorical=(), numeric=(),
               features=None, schema=None, keep_true_f=False):
    """Load a CSV into a :class:`Dataset`.

    Columns are numeric when every cell parses as a number, categorical
    otherwise, unless overridden by ``categorical``/``numeric``. When a
    ``schema`` (list of :class:`Column`) is given the predictors are encoded
    against it instead, so a saved model sees the codes it was trained on.
    ``response`` may be None when only predictors are needed.
    """
    header, rows = read_csv(path)
    cols = {name: [r[k] for r in rows] for k, name in enumerate(header)}
    for name in [response, weight, *categorical, *numeric]:
        if name is not None and name not in cols:
            raise DataError(f"{path}: column {name!r} not found")

    def numeric_column(name):
        out = np.empty(len(rows))
        for i, v in enumerate(cols[name]):
            x = _parse_float(v)
            if x is None:
                raise DataError(f"{path}: row {i + 2}, column {name!r}: "
                                f"cannot parse {v!r} as a number")
            out[i] = x
        return out

    y = numeric_column(response) if response is not None else np.zeros(len(rows))
    if np.any(y < 0):
        i = int(np.argmax(y < 0))
        raise DataError(f"{path}: negative response at row {i + 2}")
    w = numeric_column(weight) if weight is not None else np.ones(len(rows))
    if np.any(w <= 0):
        i = int(np.argmax(w <= 0))
        raise DataError(f"{path}: nonpositive weight at row {i + 2}")

    if schema is not None:
        missing = [c.name for c in schema if c.name not in cols]
        if missing:
            raise DataError(f"{path}: missing feature columns {missing}")
        X = encode_columns([cols[c.name] for c in schema], schema)
        ds = Dataset.__new__(Dataset)
        # unseen levels are encoded -1, which the strict constructor rejects
        ds.X, ds.y, ds.w, ds.columns = np.ascontiguousarray(X), y, w, list(schema)
        return ds

    if features is None:
        skip = {response, weight}
        if not keep_true_f:
            skip.add(TRUE_F_COLUMN)
        features = [h for h in header if h not in skip]
    for name in features:
        if name not in cols:
            raise DataError(f"{path}: column {name!r} not found")
    columns, X = [], np.empty((len(rows), len(features)))
    for j, name in enumerate(features):
        vals = cols[name]
        parsed = [_parse_float(v) for v in vals]
        is_num = all(v is not None for v in parsed)
        if name in numeric and not is_num:
            raise DataError(f"{path}: column {name!r} forced numeric but has "
                            "non-numeric cells")
        if name in categorical or not is_num:
            levels = sorted(set(vals), key=float if is_num else None)
            key = {v: k for k, v in enumerate(levels)}
            X[:, j] = [key[v] for v in vals]
            columns.append(Column(name, CATEGORICAL, tuple(levels)))
        else:
            X[:, j] = parsed
            columns.append(Column(name))
    return Dataset(X, y, w, columns)

