"""Model quality: MAD of the log-mean, ordered Lorenz curves and Gini indices."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


def mad(F_true, F_hat) -> float:
    """Mean absolute deviation between true and estimated log-means."""
    F_true = np.asarray(F_true, dtype=np.float64)
    F_hat = np.asarray(F_hat, dtype=np.float64)
    if F_true.shape != F_hat.shape:
        raise ValueError(f"length mismatch: {F_true.shape} vs {F_hat.shape}")
    return float(np.mean(np.abs(F_true - F_hat)))


@dataclass
class LorenzResult:
    relativity: np.ndarray   # sorted distinct relative premiums P / B
    premium: np.ndarray      # D_P at (0, each relativity)
    loss: np.ndarray         # D_L at (0, each relativity)
    gini: float
    se: float | None = None

    def rows(self):
        return [(float(a), float(b)) for a, b in zip(self.premium, self.loss)]


def ordered_lorenz(base, competing, losses) -> LorenzResult:
    """Ordered Lorenz curve of losses against base premiums, sorted by P / B.

    Policies with equal relativity enter together. The Gini index is twice
    the trapezoid area between the equality line and the curve, positive
    when the curve lies below the line.
    """
    B = np.asarray(base, dtype=np.float64)
    P = np.asarray(competing, dtype=np.float64)
    y = np.asarray(losses, dtype=np.float64)
    if not B.shape == P.shape == y.shape or B.ndim != 1:
        raise ValueError("base, competing and losses must be equal-length vectors")
    if np.any(B <= 0) or np.any(P <= 0):
        raise ValueError("premiums must be positive")
    if np.any(y < 0):
        raise ValueError("losses must be nonnegative")
    if not y.sum() > 0:
        raise ValueError("total loss must be positive")
    R = P / B
    rel, inv = np.unique(R, return_inverse=True)
    dp = np.concatenate([[0.0], np.cumsum(np.bincount(inv, weights=B))])
    dl = np.concatenate([[0.0], np.cumsum(np.bincount(inv, weights=y))])
    dp /= dp[-1]
    dl /= dl[-1]
    # exact end points despite rounding in the cumulative sums
    dp[-1] = dl[-1] = 1.0
    gap = dp - dl
    gini = float(np.sum(np.diff(dp) * (gap[1:] + gap[:-1])))
    return LorenzResult(rel, dp, dl, gini)


@dataclass
class GiniMatrix:
    names: list
    gini: np.ndarray     # [base, competing]
    selected: int        # minimax base model
    se: np.ndarray | None = None

    @property
    def selected_name(self):
        return self.names[self.selected]

    @property
    def max_gini(self):
        g = self.gini.copy()
        np.fill_diagonal(g, -np.inf)
        return g.max(axis=1)

    def rows(self, scale=100.0):
        out = []
        for b, name in enumerate(self.names):
            row = [name]
            for p in range(len(self.names)):
                cell = f"{scale * self.gini[b, p]:.3f}"
                if self.se is not None:
                    cell += f" ({scale * self.se[b, p]:.3f})"
                row.append(cell)
            out.append(row)
        return out


def _minimax(gini):
    g = np.array(gini, dtype=np.float64)
    np.fill_diagonal(g, -np.inf)
    return int(np.argmin(g.max(axis=1)))


def gini_matrix(scores, losses, names=None) -> GiniMatrix:
    """Gini index for every (base, competing) pair and the minimax choice.

    The selected model is the base whose largest Gini over competitors is
    smallest; ties go to the earlier model.
    """
    if isinstance(scores, dict):
        names = list(scores) if names is None else names
        scores = [scores[k] for k in names]
    scores = [np.asarray(s, dtype=np.float64) for s in scores]
    k = len(scores)
    if k < 2:
        raise ValueError("need at least two models")
    names = list(names) if names is not None else [f"model{i + 1}" for i in range(k)]
    G = np.zeros((k, k))
    for b in range(k):
        for p in range(k):
            if b != p:
                G[b, p] = ordered_lorenz(scores[b], scores[p], losses).gini
    return GiniMatrix(names, G, _minimax(G))


def summarize_gini(matrices) -> GiniMatrix:
    """Mean and standard error over repeated splits; minimax on the means."""
    mats = list(matrices)
    stack = np.stack([m.gini for m in mats])
    mean = stack.mean(axis=0)
    se = (stack.std(axis=0, ddof=1) / np.sqrt(len(mats)) if len(mats) > 1
          else np.zeros_like(mean))
    return GiniMatrix(mats[0].names, mean, _minimax(mean), se)


def resplit_gini(data, fitters, n_splits=20, test_fraction=0.5, seed=0) -> GiniMatrix:
    """Gini matrix averaged over random train/test splits.

    ``fitters`` maps a model name to ``f(train) -> predict`` where ``predict``
    returns positive premiums for an encoded predictor matrix. Losses are the
    held-out responses.
    """
    rng = np.random.default_rng(seed)
    names = list(fitters)
    runs = []
    for _ in range(n_splits):
        perm = rng.permutation(data.n)
        n_test = int(round(test_fraction * data.n))
        test, train = perm[:n_test], perm[n_test:]
        tr, te = data.subset(train), data.subset(test)
        scores = [fitters[k](tr)(te.X) for k in names]
        runs.append(gini_matrix(scores, te.y, names))
    return summarize_gini(runs)
