import math
import warnings

import numpy as np
import pytest

from tdboost import tweedie
from tdboost.boost import BoostConfig, fit
from tdboost.data import Dataset
from tdboost.profile import (
    LOG_PHI_BOUNDS,
    BoundaryWarning,
    estimate_rho_phi,
    phi_given_rho,
    rho_grid,
)
from tdboost.simulate import RfgSpec, gen_rfg


def full_loglik(y, w, F, rho, phi):
    return tweedie.loglik(y, np.exp(F), phi, rho, w)


@pytest.fixture(scope="module")
def rfg_truth():
    data, F, _ = gen_rfg(2000, RfgSpec(phi=2.0, rho=1.7, seed=5))
    return data, F


class TestPhiGivenRho:
    def test_recovers_phi_at_true_mean(self, rfg_truth):
        data, F = rfg_truth
        est = phi_given_rho(data.y, data.w, F, 1.7)
        assert 1.6 <= est.phi <= 2.4
        assert not est.at_boundary

    def test_local_max_certificate(self, rfg_truth):
        data, F = rfg_truth
        for rho in (1.3, 1.7):
            est = phi_given_rho(data.y, data.w, F, rho)
            ll = full_loglik(data.y, data.w, F, rho, est.phi)
            assert est.loglik == pytest.approx(ll, rel=1e-12)
            for s in (1 - 1e-3, 1 + 1e-3):
                assert ll >= full_loglik(data.y, data.w, F, rho, est.phi * s)

    def test_single_zero_hits_boundary(self):
        with pytest.warns(BoundaryWarning):
            est = phi_given_rho(np.array([0.0]), np.array([1.0]), np.array([0.0]), 1.5)
        assert est.at_boundary
        assert est.phi == pytest.approx(math.exp(LOG_PHI_BOUNDS[1]))
        # the log-likelihood is -lambda(phi), increasing in phi
        assert est.loglik == pytest.approx(-1.0 / (est.phi * 0.5))

    def test_duplication_invariance(self, rfg_truth):
        data, F = rfg_truth
        y, w, F = data.y[:400], data.w[:400], F[:400]
        a = phi_given_rho(y, w, F, 1.6)
        b = phi_given_rho(np.tile(y, 2), np.tile(w, 2), np.tile(F, 2), 1.6)
        assert b.phi == pytest.approx(a.phi, rel=1e-6)
        assert b.loglik == pytest.approx(2 * a.loglik, rel=1e-10)

    def test_weights_scale_dispersion(self, rng):
        # w = 2 with dispersion phi is the same likelihood as w = 1 with phi / 2
        y = tweedie.sample(1.0, 0.5, 1.5, rng=rng, size=500)
        F = np.zeros(500)
        a = phi_given_rho(y, np.full(500, 2.0), F, 1.5)
        b = phi_given_rho(y, np.ones(500), F, 1.5)
        assert a.phi == pytest.approx(2 * b.phi, rel=1e-6)


class TestGrid:
    def test_default_grid(self):
        g = rho_grid()
        assert g.size == 50 and g[0] == 1.01 and g[-1] == 1.99
        assert np.all((g > 1) & (g < 2))

    def test_rejects_boundary(self):
        with pytest.raises(ValueError):
            rho_grid(10, 1.0, 1.9)


@pytest.fixture(scope="module")
def result():
    data, _, _ = gen_rfg(600, RfgSpec(phi=2.0, rho=1.7, seed=8))
    cfg = BoostConfig(n_trees=150, shrinkage=0.05, n_leaves=4)
    return data, cfg, estimate_rho_phi(data, cfg, grid=rho_grid(9), tune=False)


class TestEstimate:
    def test_selection_attains_grid_max(self, result):
        data, cfg, res = result
        assert np.all(np.isfinite(res.loglik))
        assert res.loglik[res.best_index] == res.loglik.max()
        assert res.rho_star == res.rho_grid[res.best_index]
        assert res.phi_star_final == res.phi_star[res.best_index]

    def test_selection_recomputed(self, result):
        data, cfg, res = result
        k = res.best_index
        model = fit(data, cfg.replace(rho=float(res.rho_grid[k])))
        ll = full_loglik(data.y, data.w, model.predict(data), res.rho_star, res.phi_star_final)
        assert ll == pytest.approx(res.loglik[k], rel=1e-10)
        assert res.model.rho == res.rho_star and res.model.phi == res.phi_star_final
        assert np.array_equal(res.model.predict(data), model.predict(data))

    def test_table(self, result):
        _, _, res = result
        assert len(res.table()) == 9 and len(res.table()[0]) == 3

    def test_shared_tuning_uses_one_configuration(self):
        data, _, _ = gen_rfg(300, RfgSpec(phi=2.0, rho=1.7, seed=9))
        cfg = BoostConfig(n_trees=60, shrinkage=0.05)
        res = estimate_rho_phi(data, cfg, grid=[1.3, 1.6], leaves=(2, 3))
        assert res.model.n_trees == res.n_trees and res.model.n_leaves == res.n_leaves
        retuned = estimate_rho_phi(data, cfg, grid=[1.3, 1.6], leaves=(2, 3), retune=True)
        assert np.all(np.isfinite(retuned.loglik))

    def test_rejects_grid_outside(self):
        data, _, _ = gen_rfg(100, RfgSpec(seed=1))
        with pytest.raises(ValueError):
            estimate_rho_phi(data, BoostConfig(n_trees=2), grid=[0.5, 1.5], tune=False)
