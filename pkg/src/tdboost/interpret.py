"""Variable importance and partial dependence for fitted boosted models."""
from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .boost import BoostConfig, BoostedModel, fit
from .data import CATEGORICAL, Column, Dataset
from .errors import DataError


@dataclass
class ImportanceReport:
    """``raw`` is the VI in the fitted model. With shadows, ``augmented`` is
    each feature's mean VI in the shadow-augmented refits and ``baseline`` the
    matching shadow VI; both come from the same fits, so they compete for
    splits on equal terms."""

    names: list
    raw: np.ndarray
    baseline: np.ndarray | None = None
    augmented: np.ndarray | None = None

    @property
    def important(self):
        if self.baseline is None:
            return None
        return self.augmented > self.baseline

    def rows(self):
        out = []
        for j, name in enumerate(self.names):
            if self.baseline is None:
                out.append((name, float(self.raw[j])))
            else:
                out.append((name, float(self.raw[j]), float(self.augmented[j]),
                            float(self.baseline[j]), int(self.important[j])))
        return out

    @property
    def header(self):
        if self.baseline is None:
            return ["feature", "importance"]
        return ["feature", "importance", "augmented", "baseline", "important"]


def variable_importance(model: BoostedModel) -> ImportanceReport:
    """Mean over trees of the squared-error reductions credited to each feature."""
    p = len(model.columns)
    total = np.zeros(p)
    for tree in model.trees:
        internal = tree.internal
        np.add.at(total, tree.feature[internal], tree.gain[internal])
    raw = total / model.n_trees if model.n_trees else total
    return ImportanceReport([c.name for c in model.columns], raw)


def adjusted_importance(data: Dataset, cfg: BoostConfig, n_repeats=10, seed=0,
                        aggregate="mean", model: BoostedModel | None = None
                        ) -> ImportanceReport:
    """Raw importance plus a permutation baseline per feature.

    Each repeat appends an independently permuted copy of every column,
    refits with ``cfg`` and records the importance of the originals and of
    the shadow copies. The baseline is the shadow mean over repeats (or a
    quantile when ``aggregate`` is a float in (0, 1)). A feature counts as
    important when its mean importance in the augmented fits exceeds the
    baseline. Comparing against the un-augmented fit instead would favour
    noise features, which face no shadow competition there.
    """
    if n_repeats < 1:
        raise ValueError("n_repeats must be >= 1")
    if model is None:
        model = fit(data, cfg)
    raw = variable_importance(model).raw
    rng = np.random.default_rng(seed)
    p = data.p
    shadow_vi = np.empty((n_repeats, p))
    orig_vi = np.empty((n_repeats, p))
    shadow_cols = [Column(f"shadow_{c.name}", c.kind, c.levels) for c in data.columns]
    for b in range(n_repeats):
        shadow = np.empty_like(data.X)
        for j in range(p):
            shadow[:, j] = data.X[rng.permutation(data.n), j]
        aug = data.with_columns(np.hstack([data.X, shadow]),
                                list(data.columns) + shadow_cols)
        vi = variable_importance(fit(aug, cfg)).raw
        orig_vi[b], shadow_vi[b] = vi[:p], vi[p:]
    if aggregate == "mean":
        baseline = shadow_vi.mean(axis=0)
    else:
        q = float(aggregate)
        if not 0.0 < q < 1.0:
            raise ValueError("aggregate must be 'mean' or a quantile in (0, 1)")
        baseline = np.quantile(shadow_vi, q, axis=0)
    return ImportanceReport(data.names, raw, baseline, orig_vi.mean(axis=0))


@dataclass
class PartialDependenceGrid:
    features: list          # names
    grid: list              # one array of values per feature (codes for categorical)
    values: np.ndarray      # averaged F, shape (len(grid[0]),) or (len(g0), len(g1))
    labels: list | None = None

    def rows(self):
        if len(self.features) == 1:
            return [(lab, float(v)) for lab, v in zip(self.labels[0], self.values)]
        return [(a, b, float(self.values[i, k]))
                for (i, a), (k, b) in itertools.product(enumerate(self.labels[0]),
                                                        enumerate(self.labels[1]))]

    @property
    def header(self):
        return [*self.features, "F"]


def default_grid(data: Dataset, j: int, n_points=100):
    col = data.columns[j]
    if col.kind == CATEGORICAL:
        return np.arange(len(col.levels), dtype=np.float64)
    lo, hi = np.percentile(data.X[:, j], [1, 99])
    return np.linspace(lo, hi, n_points)


def partial_dependence(model: BoostedModel, data: Dataset, features, grid=None,
                       n_points=100) -> PartialDependenceGrid:
    """Average prediction over the rows of ``data`` with ``features`` forced to
    each grid value, on the log-mean scale.

    Trees are walked once per tree: at splits on a forced feature both
    branches are followed with the grid values that satisfy the rule, at other
    splits the rows are partitioned. The result equals predicting every
    (grid point, row) pair and averaging.
    """
    if isinstance(features, (str, int, np.integer)):
        features = [features]
    features = list(features)
    if len(features) not in (1, 2):
        raise DataError("partial dependence takes one or two features")
    idx = [data.feature_index(f) for f in features]
    if len(set(idx)) != len(idx):
        raise DataError("partial dependence features must differ")
    if [c.name for c in model.columns] != data.names:
        raise DataError("data columns do not match the model schema")
    if grid is None:
        grid = [default_grid(data, j, n_points) for j in idx]
    grid = [np.asarray(g, dtype=np.float64) for g in grid]
    shape = tuple(g.size for g in grid)
    total = np.zeros(shape)
    Xt = data.Xt
    n = data.n
    slot = {j: s for s, j in enumerate(idx)}
    for tree in model.trees:
        acc = np.zeros(shape)
        stack = [(0, np.arange(n), [np.ones(g.size, dtype=bool) for g in grid])]
        while stack:
            node, rows, masks = stack.pop()
            if rows.size == 0 or not all(m.any() for m in masks):
                continue
            if tree.left[node] < 0:
                block = tree.value[node] * rows.size
                if len(masks) == 1:
                    acc[masks[0]] += block
                else:
                    acc[np.ix_(masks[0], masks[1])] += block
                continue
            f = int(tree.feature[node])
            rule = tree.rule(node)
            if f in slot:
                s = slot[f]
                go = _goes_left(rule, grid[s], int(tree.n_levels[f]))
                lm = list(masks)
                rm = list(masks)
                lm[s] = masks[s] & go
                rm[s] = masks[s] & ~go
                stack.append((int(tree.right[node]), rows, rm))
                stack.append((int(tree.left[node]), rows, lm))
            else:
                go = _goes_left(rule, Xt[f, rows], int(tree.n_levels[f]))
                stack.append((int(tree.right[node]), rows[~go], masks))
                stack.append((int(tree.left[node]), rows[go], masks))
        total += acc / n
    values = model.f0 + total
    labels = []
    for j, g in zip(idx, grid):
        col = data.columns[j]
        if col.kind == CATEGORICAL:
            labels.append([col.levels[int(v)] if 0 <= v < len(col.levels) else v
                           for v in g])
        else:
            labels.append([float(v) for v in g])
    return PartialDependenceGrid([data.names[j] for j in idx], grid, values, labels)


def _goes_left(rule, x, n_levels):
    if rule.categorical:
        codes = np.asarray(x)
        known = (codes >= 0) & (codes < n_levels) & (codes == np.floor(codes))
        flags = np.zeros(n_levels, dtype=bool)
        flags[list(rule.left_levels)] = True
        return known & flags[np.where(known, codes, 0).astype(np.intp)]
    return x <= rule.threshold

