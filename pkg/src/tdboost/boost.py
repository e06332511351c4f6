"""Gradient tree boosting of the Tweedie log-mean (TDboost).

``fit`` runs the stagewise loop: negative gradient, least-squares tree on
it, closed-form Tweedie update per leaf, shrunken update of F. ``cv_tune``
picks the number of trees and the tree size by K-fold cross validation.
"""
from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from . import tweedie
from .data import Column, Dataset
from .errors import ConfigError, DataError
from .tree import RegressionTree, fit_tree

log = logging.getLogger(__name__)

ETA_CLAMP = 19.0
MODEL_FORMAT = "tdboost-model"
MODEL_VERSION = 1


@dataclass(frozen=True)
class BoostConfig:
    n_trees: int = 1000
    n_leaves: int = 3
    shrinkage: float = 0.005
    min_node: int = 10
    rho: float = 1.5
    n_folds: int = 5
    seed: int = 0

    def __post_init__(self):
        if self.n_trees < 0:
            raise ConfigError("n_trees must be >= 0")
        if self.n_leaves < 2:
            raise ConfigError("n_leaves must be >= 2")
        if not 0.0 < self.shrinkage <= 1.0:
            raise ConfigError("shrinkage must lie in (0, 1]")
        if self.min_node < 1:
            raise ConfigError("min_node must be >= 1")
        if not 1.0 < self.rho < 2.0:
            raise ConfigError("rho must lie in (1, 2)")
        if self.n_folds < 2:
            raise ConfigError("n_folds must be >= 2")

    def replace(self, **changes):
        return replace(self, **changes)


@dataclass
class BoostedModel:
    f0: float
    trees: list
    rho: float
    shrinkage: float
    columns: list
    phi: float | None = None
    n_leaves: int = 0
    min_node: int = 0
    seed: int = 0
    loss_trace: np.ndarray = field(default_factory=lambda: np.zeros(0))

    @property
    def n_trees(self):
        return len(self.trees)

    def predict(self, X, n_trees=None):
        """Log-mean F for encoded predictor rows (array or :class:`Dataset`)."""
        Xt = _as_xt(X, len(self.columns))
        F = np.full(Xt.shape[1], self.f0)
        for tree in self.trees[:n_trees]:
            F = F + tree.value[tree.apply(Xt)]
        return F

    def predict_mu(self, X, n_trees=None):
        return np.exp(self.predict(X, n_trees))

    def truncated(self, n_trees):
        return replace(self, trees=self.trees[:n_trees],
                       loss_trace=self.loss_trace[: n_trees + 1])

    def to_dict(self):
        enc = float.hex
        return {
            "format": MODEL_FORMAT,
            "version": MODEL_VERSION,
            "schema": [c.to_dict() for c in self.columns],
            "f0": enc(self.f0),
            "rho": enc(self.rho),
            "phi": None if self.phi is None else enc(self.phi),
            "shrinkage": enc(self.shrinkage),
            "n_leaves": self.n_leaves,
            "min_node": self.min_node,
            "seed": self.seed,
            "loss_trace": [enc(float(v)) for v in self.loss_trace],
            "trees": [t.to_dict(enc) for t in self.trees],
        }

    @classmethod
    def from_dict(cls, d):
        if d.get("format") != MODEL_FORMAT:
            raise DataError("not a tdboost model document")
        if d.get("version") != MODEL_VERSION:
            raise DataError(f"unsupported model version {d.get('version')}")
        dec = float.fromhex
        columns = [Column.from_dict(c) for c in d["schema"]]
        n_levels = np.array([max(len(c.levels), 1) for c in columns], dtype=np.intc)
        return cls(
            f0=dec(d["f0"]),
            trees=[RegressionTree.from_dict(t, dec, n_levels) for t in d["trees"]],
            rho=dec(d["rho"]),
            shrinkage=dec(d["shrinkage"]),
            columns=columns,
            phi=None if d["phi"] is None else dec(d["phi"]),
            n_leaves=d["n_leaves"],
            min_node=d["min_node"],
            seed=d["seed"],
            loss_trace=np.array([dec(v) for v in d["loss_trace"]]),
        )

    def dumps(self):
        return json.dumps(self.to_dict(), indent=1)

    @classmethod
    def loads(cls, text):
        return cls.from_dict(json.loads(text))

    def save(self, path):
        from .io import atomic_write
        atomic_write(path, self.dumps())

    @classmethod
    def load(cls, path):
        try:
            with open(path) as fh:
                return cls.loads(fh.read())
        except (OSError, json.JSONDecodeError, KeyError) as exc:
            raise DataError(f"cannot read model {path}: {exc}") from exc


def _as_xt(X, p):
    if isinstance(X, Dataset):
        X = X.X
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[None, :]
    if X.shape[1] != p:
        raise DataError(f"rows have {X.shape[1]} features, model expects {p}")
    return np.ascontiguousarray(X.T)


def init_intercept(data: Dataset) -> float:
    """log of the weighted mean response, the best constant fit."""
    num = float(np.sum(data.w * data.y))
    if not num > 0:
        raise DataError("all responses are zero; the intercept is -inf (unfittable data)")
    return float(np.log(num / np.sum(data.w)))


def _eta(num, den):
    with np.errstate(divide="ignore"):
        eta = np.log(num / den)
    return np.clip(eta, -ETA_CLAMP, ETA_CLAMP)


def leaf_eta(members, rho: float) -> float:
    """Closed-form minimizer of the summed loss over one region, clamped to +-19.

    ``members`` is a sequence of :class:`~tdboost.tweedie.WeightedObservation`.
    """
    if not members:
        raise ValueError("leaf has no members")
    y = np.array([m.y for m in members])
    w = np.array([m.w for m in members])
    f = np.array([m.f for m in members])
    num = np.sum(w * y * np.exp((1.0 - rho) * f))
    den = np.sum(w * np.exp((2.0 - rho) * f))
    return float(_eta(num, den))


def _boost(data: Dataset, cfg: BoostConfig, valid: Dataset | None = None):
    """Run the boosting loop; also returns the validation loss path if asked."""
    rho, nu = cfg.rho, cfg.shrinkage
    y, w = data.y, data.w
    wy = w * y
    f0 = init_intercept(data)
    F = np.full(data.n, f0)
    e1 = np.exp((1.0 - rho) * F)
    e2 = np.exp((2.0 - rho) * F)
    trace = np.empty(cfg.n_trees + 1)
    trace[0] = np.sum(w * (-y * e1 / (1.0 - rho) + e2 / (2.0 - rho)))
    if valid is not None:
        Fv = np.full(valid.n, f0)
        vtrace = np.empty(cfg.n_trees + 1)
        vtrace[0] = np.sum(tweedie.loss(valid.y, valid.w, Fv, rho))
    trees = []
    for m in range(1, cfg.n_trees + 1):
        u = wy * e1 - w * e2
        tree, leaf = fit_tree(data, u, cfg.n_leaves, cfg.min_node, return_leaves=True)
        k = tree.n_nodes
        num = np.bincount(leaf, weights=wy * e1, minlength=k)
        den = np.bincount(leaf, weights=w * e2, minlength=k)
        leaves = tree.leaves
        tree.value[leaves] = nu * _eta(num[leaves], den[leaves])
        F = F + tree.value[leaf]
        e1 = np.exp((1.0 - rho) * F)
        e2 = np.exp((2.0 - rho) * F)
        trace[m] = np.sum(w * (-y * e1 / (1.0 - rho) + e2 / (2.0 - rho)))
        trees.append(tree)
        if valid is not None:
            Fv = Fv + tree.value[tree.apply(valid.Xt)]
            vtrace[m] = np.sum(tweedie.loss(valid.y, valid.w, Fv, rho))
    model = BoostedModel(f0=f0, trees=trees, rho=rho, shrinkage=nu,
                         columns=list(data.columns), n_leaves=cfg.n_leaves,
                         min_node=cfg.min_node, seed=cfg.seed, loss_trace=trace)
    if valid is not None:
        return model, vtrace
    return model


def fit(data: Dataset, cfg: BoostConfig, phi: float | None = None) -> BoostedModel:
    model = _boost(data, cfg)
    model.phi = phi
    return model


def predict(model: BoostedModel, rows):
    """Return (F, mu) for encoded rows."""
    F = model.predict(rows)
    return F, np.exp(F)


def make_folds(n: int, K: int, seed: int) -> np.ndarray:
    """Fold index of every row; depends only on (n, K, seed)."""
    if K < 2 or n < K:
        raise ConfigError(f"need 2 <= K <= n, got K={K}, n={n}")
    perm = np.random.default_rng(seed).permutation(n)
    folds = np.empty(n, dtype=np.intp)
    folds[perm] = np.arange(n) % K
    return folds


@dataclass
class CVResult:
    leaves: list
    surface: np.ndarray        # (len(leaves), n_trees + 1) CV loss
    best_trees: dict           # L -> M_hat_L
    best_leaves: int
    folds: np.ndarray

    @property
    def best_n_trees(self):
        return self.best_trees[self.best_leaves]

    def loss(self, L, M):
        return float(self.surface[self.leaves.index(L), M])

    def as_config(self, cfg: BoostConfig) -> BoostConfig:
        return cfg.replace(n_trees=int(self.best_n_trees), n_leaves=int(self.best_leaves))


def cv_tune(data: Dataset, cfg: BoostConfig, leaves=(2, 3, 4, 5),
            n_trees: int | None = None) -> CVResult:
    """K-fold CV loss for every M <= n_trees and every L in ``leaves``.

    Ties go to the smaller M, then the smaller L.
    """
    n_trees = cfg.n_trees if n_trees is None else n_trees
    K = cfg.n_folds
    # n >= K keeps every fold nonempty and allows leave-one-out
    if data.n < K:
        raise ConfigError(f"need at least {K} rows for {K}-fold CV")
    leaves = sorted(set(int(L) for L in leaves))
    folds = make_folds(data.n, K, cfg.seed)
    surface = np.zeros((len(leaves), n_trees + 1))
    for a, L in enumerate(leaves):
        c = cfg.replace(n_leaves=L, n_trees=n_trees)
        for k in range(K):
            train = data.subset(np.flatnonzero(folds != k))
            valid = data.subset(np.flatnonzero(folds == k))
            try:
                _, vtrace = _boost(train, c, valid)
            except DataError as exc:
                raise DataError(f"CV fold {k}: {exc}") from exc
            surface[a] += vtrace
        log.debug("cv L=%d done", L)
    surface /= data.n
    best_trees = {L: int(np.argmin(surface[a])) for a, L in enumerate(leaves)}
    mins = [surface[a, best_trees[L]] for a, L in enumerate(leaves)]
    best_leaves = leaves[int(np.argmin(mins))]
    return CVResult(leaves, surface, best_trees, best_leaves, folds)


def config_dict(cfg: BoostConfig):
    return asdict(cfg)
