import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from tdboost.boost import BoostConfig, fit
from tdboost.metrics import (
    gini_matrix,
    mad,
    ordered_lorenz,
    resplit_gini,
    summarize_gini,
)
from tdboost.simulate import gen_model2


class TestMad:
    def test_examples(self):
        assert mad([1.0, 2.0], [1.0, 2.0]) == 0.0
        assert mad([0.0, 1.0], [1.0, 0.0]) == 1.0

    def test_hand_fixture(self):
        a = np.array([0.1, -0.4, 2.0, 0.0, 1.5, 0.3, -1.0, 0.7, 0.25, 3.0])
        b = np.array([0.0, -0.5, 1.0, 0.5, 1.5, 0.2, -0.5, 1.2, 0.0, 2.5])
        # |diffs| = .1 .1 1 .5 0 .1 .5 .5 .25 .5, sum 3.55
        assert mad(a, b) == pytest.approx(0.355, abs=1e-15)

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            mad([1.0], [1.0, 2.0])


class TestLorenz:
    def test_identical_scores(self):
        res = ordered_lorenz([1.0, 2.0, 3.0], [1.0, 2.0, 3.0], [0.0, 1.0, 5.0])
        assert res.gini == 0.0
        assert res.premium.tolist() == [0.0, 1.0] and res.loss.tolist() == [0.0, 1.0]

    def test_two_point_example(self):
        res = ordered_lorenz([1.0, 1.0], [2.0, 1.0], [0.0, 10.0])
        assert res.premium.tolist() == [0.0, 0.5, 1.0]
        assert res.loss.tolist() == [0.0, 1.0, 1.0]
        assert res.gini == -0.5

    def test_ties_enter_together(self):
        res = ordered_lorenz([1.0] * 4, [1.0, 2.0, 1.0, 3.0], [1.0, 1.0, 1.0, 1.0])
        assert res.relativity.tolist() == [1.0, 2.0, 3.0]
        assert res.premium.tolist() == [0.0, 0.5, 0.75, 1.0]

    def test_favourable_model_positive(self):
        # competing premium tracks the losses, base is flat
        y = np.array([0.0, 0.0, 1.0, 5.0, 10.0])
        res = ordered_lorenz(np.ones(5), y + 0.1, y)
        assert res.gini > 0

    @pytest.mark.parametrize("kw", [dict(base=[0.0, 1.0]), dict(competing=[-1.0, 1.0]),
                                    dict(losses=[-1.0, 2.0]), dict(losses=[0.0, 0.0]),
                                    dict(base=[1.0, 1.0, 1.0])])
    def test_invalid(self, kw):
        args = dict(base=[1.0, 1.0], competing=[1.0, 2.0], losses=[1.0, 1.0])
        args.update(kw)
        with pytest.raises(ValueError):
            ordered_lorenz(**args)


vectors = st.integers(2, 60).flatmap(lambda n: st.tuples(
    hnp.arrays(np.float64, n, elements=st.floats(0.01, 100)),
    hnp.arrays(np.float64, n, elements=st.floats(0.01, 100)),
    hnp.arrays(np.float64, n, elements=st.floats(0, 1000))))


@settings(max_examples=200, deadline=None)
@given(vectors)
def test_curve_monotone_with_exact_ends(v):
    B, P, y = v
    if not y.sum() > 0:
        y = y + 1.0
    res = ordered_lorenz(B, P, y)
    for c in (res.premium, res.loss):
        assert c[0] == 0.0 and c[-1] == 1.0
        assert np.all(np.diff(c) >= 0)
    assert -1.0 <= res.gini <= 1.0


@settings(max_examples=200, deadline=None)
@given(vectors, st.integers(-6, 6), st.integers(-6, 6))
def test_scale_invariance(v, kb, kp):
    # powers of two rescale exactly, so the ratios, their order and every
    # normalized cumulative sum are reproduced bit for bit
    B, P, y = v
    if not y.sum() > 0:
        y = y + 1.0
    a = ordered_lorenz(B, P, y)
    b = ordered_lorenz(B * 2.0 ** kb, P * 2.0 ** kp, y)
    assert np.array_equal(np.argsort(P / B, kind="stable"),
                          np.argsort((P * 2.0 ** kp) / (B * 2.0 ** kb), kind="stable"))
    assert a.gini == b.gini


class TestGiniMatrix:
    def test_zero_diagonal_and_pick(self, rng):
        y = rng.gamma(0.5, 2.0, 300)
        scores = [y + rng.uniform(0.1, 1, 300), np.ones(300), rng.uniform(0.1, 1, 300)]
        res = gini_matrix(scores, y, ["good", "flat", "noise"])
        assert np.all(np.diag(res.gini) == 0.0)
        assert res.selected_name == "good"
        rows = res.rows()
        assert rows[0][0] == "good" and rows[0][1] == "0.000"

    def test_identical_scores_tie_to_first(self):
        s = np.array([1.0, 2.0, 3.0])
        res = gini_matrix({"a": s, "b": s.copy()}, np.array([1.0, 0.0, 2.0]))
        assert np.all(res.gini == 0.0) and res.selected == 0

    def test_needs_two_models(self):
        with pytest.raises(ValueError):
            gini_matrix([np.ones(3)], np.ones(3))

    def test_summary_structure(self, rng):
        y = rng.gamma(0.5, 2.0, 100)
        mats = [gini_matrix([y + rng.uniform(0.1, 1, 100), rng.uniform(0.1, 1, 100)], y)
                for _ in range(5)]
        s = summarize_gini(mats)
        np.testing.assert_allclose(s.gini, np.mean([m.gini for m in mats], axis=0))
        assert s.se.shape == (2, 2) and np.all(np.diag(s.se) == 0)
        assert "(" in s.rows()[0][2]

    def test_resplit_pipeline(self):
        data, _ = gen_model2(400, 3)

        def boosted(train):
            model = fit(train, BoostConfig(n_trees=50, shrinkage=0.1))
            return model.predict_mu

        def flat(train):
            mean = float(np.mean(train.y))
            return lambda X: np.full(len(X), mean)

        res = resplit_gini(data, {"tdboost": boosted, "flat": flat}, n_splits=4, seed=1)
        assert res.gini.shape == (2, 2) and res.se is not None
        assert res.selected_name == "tdboost"
        assert res.gini[1, 0] > 0
