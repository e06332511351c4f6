import math

import numpy as np
import pytest

from tdboost.simulate import (
    RfgSpec,
    draw_rfg_function,
    gen_model1,
    gen_model2,
    gen_rfg,
    model1_F,
    model2_F,
    random_orthonormal,
)


class TestModel1:
    def test_target(self):
        assert model1_F(0.4) == 0.0 and model1_F(0.6) == 0.5
        assert model1_F(0.5) == 0.0

    def test_mean_above_step(self):
        data, F = gen_model1(100_000, 1)
        hi = F == 0.5
        y = data.y[hi]
        mu = math.exp(0.5)
        se = math.sqrt(0.5 * mu ** 1.5 / y.size)
        assert abs(y.mean() - mu) < 3 * se

    def test_shape_and_zeros(self):
        data, F = gen_model1(2000, 2)
        assert data.X.shape == (2000, 1) and np.all(data.w == 1.0)
        assert np.array_equal(F, model1_F(data.X[:, 0]))
        assert np.all(data.y >= 0) and 0 < np.mean(data.y == 0) < 1


class TestModel2:
    def test_values(self):
        assert model2_F(1.0, 0.0) == pytest.approx(1 + math.exp(-4), rel=1e-15)
        assert model2_F(0.5, 0.5) == pytest.approx(2 * math.exp(-1), rel=1e-15)

    def test_symmetry(self, rng):
        x1, x2 = rng.uniform(size=(2, 100))
        np.testing.assert_allclose(model2_F(x1, x2), model2_F(1 - x1, 1 - x2), rtol=1e-14)

    def test_generator(self):
        data, F = gen_model2(500, 3)
        assert data.X.shape == (500, 2)
        assert np.array_equal(F, model2_F(data.X[:, 0], data.X[:, 1]))


class TestRfg:
    def test_orthonormal(self, rng):
        for k in range(1, 11):
            U = random_orthonormal(k, rng)
            assert np.max(np.abs(U.T @ U - np.eye(k))) < 1e-12

    def test_terms(self):
        f = draw_rfg_function(RfgSpec(seed=4))
        assert len(f.terms) == 20
        for t in f.terms:
            assert -1 <= t.coef <= 1
            assert 2 <= t.subset.size <= 10 and len(set(t.subset)) == t.subset.size
            assert np.all((np.sqrt(t.d) >= 0.1) & (np.sqrt(t.d) <= 2.0))
            assert np.max(np.abs(t.U.T @ t.U - np.eye(t.subset.size))) < 1e-12
            np.testing.assert_allclose(t.V, t.U @ np.diag(t.d) @ t.U.T, atol=1e-12)
            # the bump peaks at its mean
            x = np.zeros((1, 10))
            x[0, t.subset] = t.mean
            assert t(x)[0] == 1.0

    def test_function_value(self, rng):
        f = draw_rfg_function(RfgSpec(seed=5))
        X = rng.normal(size=(4, 10))
        ref = np.zeros(4)
        for t in f.terms:
            z = X[:, t.subset] - t.mean
            ref += t.coef * np.exp(-0.5 * np.sum((z @ t.V) * z, axis=1))
        np.testing.assert_allclose(f(X), ref, rtol=1e-13)

    def test_reproducible(self):
        a = gen_rfg(300, RfgSpec(seed=7))
        b = gen_rfg(300, RfgSpec(seed=7))
        assert np.array_equal(a[0].X, b[0].X) and np.array_equal(a[0].y, b[0].y)
        assert np.array_equal(a[1], b[1])
        c = gen_model2(100, 1)[0].y
        assert np.array_equal(c, gen_model2(100, 1)[0].y)

    def test_zeros_present(self):
        data, F, _ = gen_rfg(2000, RfgSpec(phi=2.0, rho=1.7, seed=2))
        assert np.all(data.y >= 0) and np.mean(data.y == 0) > 0


def expected_subset_size(p=10, offset=2.5, mean=2.0):
    """E[min(floor(offset + r), p)] for r ~ Exp(mean): sum_k P(floor(.) >= k)."""
    total = 0.0
    for k in range(1, p + 1):
        total += 1.0 if k <= offset else math.exp(-(k - offset) / mean)
    return total


def subset_sizes(n_draws=10_000):
    spec = RfgSpec(n_terms=n_draws, seed=11)
    return np.array([t.subset.size for t in draw_rfg_function(spec).terms])


def test_mean_subset_size_matches_law():
    sizes = subset_sizes()
    expected = expected_subset_size()
    var = np.var(sizes)
    assert abs(sizes.mean() - expected) < 4 * math.sqrt(var / sizes.size)
    # geometric-series closed form of the same sum
    closed = 2 + math.exp(-0.25) * (1 - math.exp(-4)) / (1 - math.exp(-0.5))
    assert expected == pytest.approx(closed, rel=1e-14)
    assert round(expected, 4) == 3.9431


@pytest.mark.xfail(strict=True, reason=(
    "min(floor(2.5 + Exp(mean 2)), 10) has expectation 3.94, so the stated "
    "interaction order between four and five does not follow from the stated law"))
def test_mean_subset_size_between_four_and_five():
    assert 4.0 <= subset_sizes().mean() <= 5.0
