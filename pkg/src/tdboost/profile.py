"""Profile-likelihood estimation of the index rho and dispersion phi.

For each candidate rho the mean surface is fit by boosting (which does not
depend on phi), phi is then maximized by bounded Brent search on log phi,
and rho is taken as the grid point with the largest profile log-likelihood.
"""
from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize_scalar

from . import tweedie
from .boost import BoostConfig, BoostedModel, cv_tune, fit
from .data import Dataset
from .errors import TDBoostError

log = logging.getLogger(__name__)

LOG_PHI_BOUNDS = (np.log(1e-4), np.log(1e4))
LOG_PHI_TOL = 1e-8


class BoundaryWarning(UserWarning):
    pass


@dataclass
class PhiEstimate:
    phi: float
    loglik: float
    at_boundary: bool


@dataclass
class ProfileResult:
    rho_grid: np.ndarray
    phi_star: np.ndarray
    loglik: np.ndarray
    rho_star: float
    phi_star_final: float
    n_trees: int
    n_leaves: int
    model: BoostedModel | None = None

    @property
    def best_index(self):
        return int(np.nanargmax(self.loglik))

    def table(self):
        return [(float(r), float(p), float(ll))
                for r, p, ll in zip(self.rho_grid, self.phi_star, self.loglik)]


class _PhiObjective:
    """Profile log-likelihood in phi for fixed fitted means and rho.

    Only the series term depends on phi nonlinearly; the rest is
    (sum_i w_i (y_i theta_i - kappa_i)) / phi.
    """

    def __init__(self, y, w, F, rho):
        mu = np.exp(F)
        theta = mu ** (1.0 - rho) / (1.0 - rho)
        kappa = mu ** (2.0 - rho) / (2.0 - rho)
        self.lin = float(np.sum(w * (y * theta - kappa)))
        pos = y > 0
        self.y_pos = np.ascontiguousarray(y[pos])
        self.w_pos = w[pos]
        self.rho = rho

    def __call__(self, phi):
        ll = self.lin / phi
        if self.y_pos.size:
            ll += float(np.sum(tweedie.log_series_normalizer(
                self.y_pos, phi / self.w_pos, self.rho)))
        return ll


def phi_given_rho(y, w, F, rho, bounds=LOG_PHI_BOUNDS, tol=LOG_PHI_TOL) -> PhiEstimate:
    """Maximize the Tweedie log-likelihood over phi with the means exp(F) fixed.

    Dispersion enters each observation as phi / w. The search runs on
    log phi over ``bounds``; a maximizer at the edge is flagged and warned.
    """
    y = np.asarray(y, dtype=np.float64)
    w = np.ones_like(y) if w is None else np.asarray(w, dtype=np.float64)
    obj = _PhiObjective(y, w, np.asarray(F, dtype=np.float64), rho)
    res = minimize_scalar(lambda s: -obj(np.exp(s)), bounds=bounds, method="bounded",
                          options={"xatol": tol, "maxiter": 500})
    s = float(res.x)
    edge = 10 * tol + 1e-6
    # bounded Brent never evaluates the end points, so check them directly
    lo, hi = bounds
    cands = [(s, -float(res.fun)), (lo, obj(np.exp(lo))), (hi, obj(np.exp(hi)))]
    s, ll = max(cands, key=lambda c: c[1])
    at_boundary = s - lo < edge or hi - s < edge
    if at_boundary:
        warnings.warn(f"phi maximum at the search boundary (phi={np.exp(s):.4g})",
                      BoundaryWarning, stacklevel=2)
    return PhiEstimate(float(np.exp(s)), float(ll), bool(at_boundary))


def rho_grid(n=50, lo=1.01, hi=1.99):
    if not 1.0 < lo <= hi < 2.0:
        raise ValueError("rho grid must lie strictly inside (1, 2)")
    return np.linspace(lo, hi, n)


def estimate_rho_phi(data: Dataset, cfg: BoostConfig, grid=None, retune=False,
                     leaves=(2, 3, 4, 5), tune_rho=1.5, tune=True,
                     keep_model=True) -> ProfileResult:
    """Grid search of the profile likelihood over rho.

    By default (M, L) are chosen once by cross validation at ``tune_rho`` and
    reused at every grid point; ``retune=True`` cross-validates at each
    point instead, and ``tune=False`` uses ``cfg`` as given. Grid points whose
    fit fails are dropped with a warning.
    """
    grid = rho_grid() if grid is None else np.asarray(grid, dtype=np.float64)
    if np.any((grid <= 1.0) | (grid >= 2.0)):
        raise ValueError("rho grid must lie strictly inside (1, 2)")
    base = cfg
    if tune and not retune:
        base = cv_tune(data, cfg.replace(rho=tune_rho), leaves=leaves).as_config(cfg)
        log.info("shared tuning at rho=%.3g: M=%d L=%d", tune_rho,
                 base.n_trees, base.n_leaves)
    phis = np.full(grid.size, np.nan)
    lls = np.full(grid.size, np.nan)
    best_model, best_ll = None, -np.inf
    for j, rho in enumerate(grid):
        c = base.replace(rho=float(rho))
        try:
            if tune and retune:
                c = cv_tune(data, c, leaves=leaves).as_config(c)
            model = fit(data, c)
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", BoundaryWarning)
                est = phi_given_rho(data.y, data.w, model.predict(data), rho)
        except (TDBoostError, FloatingPointError, ValueError) as exc:
            warnings.warn(f"rho={rho:.4g} excluded: {exc}", RuntimeWarning, stacklevel=2)
            continue
        phis[j], lls[j] = est.phi, est.loglik
        if keep_model and est.loglik > best_ll:
            best_model, best_ll = model, est.loglik
    if np.all(np.isnan(lls)):
        raise TDBoostError("profile likelihood failed at every grid point")
    best = int(np.nanargmax(lls))
    rho_star, phi_star = float(grid[best]), float(phis[best])
    if best_model is not None:
        # the fit at rho* is already the final model; only phi is attached
        best_model.phi = phi_star
    return ProfileResult(grid, phis, lls, rho_star, phi_star,
                         n_trees=base.n_trees, n_leaves=base.n_leaves, model=best_model)
