"""L-terminal-node least-squares regression trees (the boosting base learner)."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .data import Dataset
from .errors import DataError


@dataclass(frozen=True)
class SplitRule:
    """``x[feature] <= threshold`` goes left, or ``x[feature] in left_levels``."""

    feature: int
    threshold: float | None = None
    left_levels: frozenset | None = None

    @property
    def categorical(self):
        return self.left_levels is not None

    def goes_left(self, value):
        if self.categorical:
            return value in self.left_levels
        return value <= self.threshold


@dataclass
class RegressionTree:
    """Flat node arrays. Node 0 is the root; ``left[k] == -1`` marks a leaf.

    ``value`` holds the least-squares leaf means from growing; boosting
    overwrites the leaf entries with the shrunken Tweedie updates.
    ``gain`` is the squared-error reduction recorded at each internal node.
    """

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    gain: np.ndarray
    count: np.ndarray
    cat_offset: np.ndarray
    cat_flags: np.ndarray
    n_levels: np.ndarray

    @property
    def n_nodes(self):
        return len(self.left)

    @property
    def leaves(self):
        return np.flatnonzero(self.left < 0)

    @property
    def internal(self):
        return np.flatnonzero(self.left >= 0)

    @property
    def n_leaves(self):
        return int(np.sum(self.left < 0))

    def rule(self, node) -> SplitRule:
        f = int(self.feature[node])
        if self.cat_offset[node] >= 0:
            lo = int(self.cat_offset[node])
            flags = self.cat_flags[lo: lo + int(self.n_levels[f])]
            return SplitRule(f, left_levels=frozenset(np.flatnonzero(flags).tolist()))
        return SplitRule(f, threshold=float(self.threshold[node]))

    def apply(self, Xt):
        """Leaf id for every column of the (p, n) matrix ``Xt``."""
        return kernels.apply_tree(Xt, self.n_levels, self.feature, self.threshold,
                                  self.left, self.right, self.cat_offset,
                                  self.cat_flags)

    def predict(self, Xt):
        return self.value[self.apply(Xt)]

    def to_dict(self, encode):
        return {
            "feature": self.feature.tolist(),
            "threshold": [encode(v) for v in self.threshold],
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "value": [encode(v) for v in self.value],
            "gain": [encode(v) for v in self.gain],
            "count": self.count.tolist(),
            "cat_offset": self.cat_offset.tolist(),
            "cat_flags": self.cat_flags.tolist(),
        }

    @classmethod
    def from_dict(cls, d, decode, n_levels):
        return cls(
            feature=np.array(d["feature"], dtype=np.intc),
            threshold=np.array([decode(v) for v in d["threshold"]]),
            left=np.array(d["left"], dtype=np.intc),
            right=np.array(d["right"], dtype=np.intc),
            value=np.array([decode(v) for v in d["value"]]),
            gain=np.array([decode(v) for v in d["gain"]]),
            count=np.array(d["count"], dtype=np.intc),
            cat_offset=np.array(d["cat_offset"], dtype=np.intc),
            cat_flags=np.array(d["cat_flags"], dtype=np.uint8),
            n_levels=n_levels,
        )


def fit_tree(data: Dataset, targets, L: int, min_node: int = 10,
             return_leaves=False):
    """Grow a best-first tree with at most ``L`` leaves on working responses.

    The leaf whose best split gives the largest reduction in (unweighted)
    squared error is split next, until ``L`` leaves exist or no split leaves
    ``min_node`` rows on both sides. Numeric splits put the threshold midway
    between adjacent observed values; categorical levels are ordered by their
    mean target within the node and split like an ordered variable.
    """
    targets = np.ascontiguousarray(targets, dtype=np.float64)
    if targets.shape != (data.n,):
        raise DataError(f"expected {data.n} targets, got {targets.shape}")
    if L < 2:
        raise ValueError("L must be at least 2")
    if min_node < 1:
        raise ValueError("min_node must be at least 1")
    if data.n < 2 * min_node:
        raise DataError(f"cannot grow a tree on {data.n} rows with min_node={min_node}")
    out = kernels.grow_tree(data.Xt, data.order, data.is_cat, data.n_levels,
                            targets, int(L), int(min_node))
    leaf_of_row = out.pop("leaf_of_row")
    tree = RegressionTree(n_levels=data.n_levels, **out)
    if return_leaves:
        return tree, leaf_of_row
    return tree


def route(tree: RegressionTree, row, n_features=None) -> int:
    """Leaf reached by a single encoded predictor row."""
    row = np.asarray(row, dtype=np.float64).ravel()
    p = len(tree.n_levels) if n_features is None else n_features
    if row.shape[0] != p:
        raise DataError(f"row has {row.shape[0]} features, model expects {p}")
    return int(tree.apply(np.ascontiguousarray(row[:, None]))[0])
