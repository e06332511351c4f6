import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from tdboost.data import Dataset
from tdboost.errors import DataError
from tdboost.tree import SplitRule, fit_tree, route

from oracles import exhaustive_best_split


def oracle_tree(X, u, L, min_node):
    """Best-first growth driven by exhaustive split search; returns the
    realized gains in order and the (feature, threshold) of each split."""
    leaves = [np.arange(len(u))]
    gains, splits = [], []
    while len(leaves) < L:
        cands = [(exhaustive_best_split(X, u, rows, min_node), k)
                 for k, rows in enumerate(leaves)]
        cands = [(c, k) for c, k in cands if c is not None and c[0] > 0]
        if not cands:
            break
        (gain, j, thr), k = max(cands, key=lambda c: c[0][0])
        rows = leaves.pop(k)
        left = X[rows, j] <= thr
        leaves += [rows[left], rows[~left]]
        gains.append(gain)
        splits.append((j, thr))
    return gains, splits


def split_order(tree):
    """Internal nodes in the order they were split (children follow parents)."""
    return [k for k in range(tree.n_nodes) if tree.left[k] >= 0]


@pytest.fixture
def separable():
    x = np.linspace(0.0, 1.0, 40)
    u = np.where(x <= 0.5, -1.0, 1.0)
    return Dataset.from_arrays(x[:, None], np.ones(40)), u


class TestFit:
    def test_separable_split(self, separable, backend):
        data, u = separable
        tree = fit_tree(data, u, 2, min_node=5)
        assert tree.n_leaves == 2
        rule = tree.rule(0)
        x = data.X[:, 0]
        assert x[x <= 0.5].max() < rule.threshold < x[x > 0.5].min()
        assert sorted(tree.value[tree.leaves]) == [-1.0, 1.0]

    def test_constant_targets(self, separable, backend):
        data, _ = separable
        tree = fit_tree(data, np.full(40, 3.25), 4, min_node=2)
        assert tree.n_leaves == 1 and tree.n_nodes == 1
        assert tree.value[0] == 3.25

    def test_too_few_rows(self, separable):
        data, u = separable
        with pytest.raises(DataError):
            fit_tree(data, u, 2, min_node=21)

    def test_target_length_checked(self, separable):
        data, _ = separable
        with pytest.raises(DataError):
            fit_tree(data, np.zeros(5), 2)

    @pytest.mark.parametrize("seed", range(8))
    def test_matches_exhaustive_oracle(self, seed, backend):
        rng = np.random.default_rng(seed)
        X = rng.normal(size=(50, 3))
        u = np.sin(2 * X[:, 0]) + X[:, 1] ** 2 + 0.3 * rng.normal(size=50)
        data = Dataset.from_arrays(X, np.ones(50))
        tree = fit_tree(data, u, 3, min_node=5)
        gains, splits = oracle_tree(X, u, 3, 5)
        nodes = split_order(tree)
        got = sorted(tree.gain[nodes], reverse=True)
        np.testing.assert_allclose(sorted(gains, reverse=True), got, rtol=1e-10)
        assert sum(tree.gain[nodes]) == pytest.approx(sum(gains), rel=1e-12)
        assert {(int(tree.feature[k]), float(tree.threshold[k])) for k in nodes} == set(splits)

    def test_exactly_L_leaves_when_splittable(self, rng, backend):
        X = rng.uniform(size=(200, 2))
        u = rng.normal(size=200)
        data = Dataset.from_arrays(X, np.ones(200))
        for L in range(2, 9):
            assert fit_tree(data, u, L, min_node=5).n_leaves == L

    def test_min_node_respected(self, rng, backend):
        X = rng.uniform(size=(60, 2))
        u = rng.normal(size=60)
        data = Dataset.from_arrays(X, np.ones(60))
        tree, leaf = fit_tree(data, u, 6, min_node=10, return_leaves=True)
        counts = np.bincount(leaf, minlength=tree.n_nodes)[tree.leaves]
        assert counts.min() >= 10
        assert np.array_equal(tree.count[tree.leaves], counts)

    def test_tie_prefers_lower_feature(self, backend):
        x = np.repeat(np.arange(4.0), 5)
        X = np.column_stack([x, x])
        u = (x >= 2).astype(float)
        tree = fit_tree(Dataset.from_arrays(X, np.ones(20)), u, 2, min_node=1)
        assert tree.feature[0] == 0 and tree.rule(0).threshold == 1.5

    def test_tie_prefers_lower_threshold(self, backend):
        # u symmetric around the middle: cutting after 1 or after 3 gains equally
        x = np.arange(5.0)
        u = np.array([1.0, 0.0, 0.0, 0.0, 1.0])
        tree = fit_tree(Dataset.from_arrays(x[:, None], np.ones(5)), u, 2, min_node=1)
        assert tree.rule(0).threshold == 0.5

    def test_weights_do_not_enter_split(self, rng, backend):
        X = rng.uniform(size=(80, 2))
        u = rng.normal(size=80)
        a = fit_tree(Dataset.from_arrays(X, np.ones(80)), u, 4, min_node=3)
        b = fit_tree(Dataset.from_arrays(X, np.ones(80), w=rng.uniform(0.1, 5, 80)), u, 4,
                     min_node=3)
        assert np.array_equal(a.threshold, b.threshold) and np.array_equal(a.value, b.value)


class TestCategorical:
    def test_subset_optimality(self, backend):
        # ordering levels by mean must reach the best of all 2^k subsets
        rng = np.random.default_rng(7)
        k = 6
        codes = rng.integers(0, k, 90)
        mean = rng.normal(size=k) * 2
        u = mean[codes] + rng.normal(size=90)
        data = Dataset.from_arrays(codes[:, None].astype(float), np.ones(90), categorical=[0])
        tree = fit_tree(data, u, 2, min_node=1)
        best = 0.0
        base = np.sum((u - u.mean()) ** 2)
        for r in range(1, k):
            for left in itertools.combinations(range(k), r):
                m = np.isin(codes, left)
                g = base - np.sum((u[m] - u[m].mean()) ** 2) - np.sum((u[~m] - u[~m].mean()) ** 2)
                best = max(best, g)
        assert tree.gain[0] == pytest.approx(best, rel=1e-12)
        rule = tree.rule(0)
        assert rule.categorical and 0 < len(rule.left_levels) < k

    def test_unseen_level_routes_right(self, backend):
        codes = np.repeat([0.0, 1.0], 10)
        u = np.where(codes == 0, -1.0, 1.0)
        data = Dataset.from_arrays(codes[:, None], np.ones(20), categorical=[0])
        tree = fit_tree(data, u, 2, min_node=1)
        left_level = next(iter(tree.rule(0).left_levels))
        assert route(tree, [float(left_level)]) == tree.left[0]
        assert route(tree, [2.0]) == tree.right[0]
        assert route(tree, [-1.0]) == tree.right[0]

    def test_mixed_columns(self, rng, backend):
        n = 300
        c = rng.integers(0, 5, n).astype(float)
        x = rng.uniform(size=n)
        u = np.where(np.isin(c, [1, 3]), 2.0, 0.0) + (x > 0.7) + 0.1 * rng.normal(size=n)
        data = Dataset.from_arrays(np.column_stack([x, c]), np.ones(n), categorical=[1])
        tree = fit_tree(data, u, 3, min_node=5)
        assert tree.rule(0).feature == 1
        assert tree.rule(0).left_levels in ({0, 2, 4}, {1, 3})


class TestRoute:
    def test_root_only(self, backend):
        data = Dataset.from_arrays(np.arange(20.0)[:, None], np.ones(20))
        tree = fit_tree(data, np.zeros(20), 3, min_node=2)
        assert route(tree, [123.0]) == 0

    def test_threshold_goes_left(self, separable, backend):
        data, u = separable
        tree = fit_tree(data, u, 2, min_node=5)
        thr = tree.rule(0).threshold
        assert route(tree, [thr]) == tree.left[0]
        assert route(tree, [np.nextafter(thr, np.inf)]) == tree.right[0]

    def test_schema_mismatch(self, separable):
        data, u = separable
        tree = fit_tree(data, u, 2, min_node=5)
        with pytest.raises(DataError):
            route(tree, [0.1, 0.2])

    def test_split_rule(self):
        assert SplitRule(0, threshold=1.0).goes_left(1.0)
        assert not SplitRule(0, left_levels=frozenset({1})).goes_left(2)


matrices = hnp.arrays(np.float64, st.tuples(st.integers(12, 40), st.integers(1, 3)),
                      elements=st.floats(-5, 5, allow_nan=False).map(lambda v: round(v, 1)))


class TestProperties:
    @settings(max_examples=40, deadline=None)
    @given(matrices, st.integers(0, 2 ** 32 - 1), st.integers(2, 6))
    def test_partition_and_gains(self, X, seed, L):
        rng = np.random.default_rng(seed)
        u = rng.normal(size=X.shape[0])
        data = Dataset.from_arrays(X, np.ones(X.shape[0]))
        tree, leaf = fit_tree(data, u, L, min_node=2, return_leaves=True)
        assert tree.n_leaves <= L
        # every row lands in exactly one leaf and apply agrees with growth
        assert np.array_equal(tree.apply(data.Xt), leaf)
        assert np.all(tree.left[leaf] < 0)
        # fresh points also reach a leaf
        Z = rng.uniform(-6, 6, size=(30, X.shape[1]))
        assert np.all(tree.left[tree.apply(np.ascontiguousarray(Z.T))] < 0)
        # recorded gain = parent SSE - children SSE, nonnegative
        for k in tree.internal:
            rows = _rows_under(tree, leaf, k)
            lrows = _rows_under(tree, leaf, tree.left[k])
            rrows = _rows_under(tree, leaf, tree.right[k])
            sse = lambda r: np.sum((u[r] - u[r].mean()) ** 2)
            assert tree.gain[k] >= 0
            assert tree.gain[k] == pytest.approx(sse(rows) - sse(lrows) - sse(rrows), abs=1e-9)
        for k in tree.leaves:
            r = leaf == k
            assert tree.value[k] == pytest.approx(u[r].mean(), abs=1e-12)

    @settings(max_examples=30, deadline=None)
    @given(matrices, st.integers(0, 2 ** 32 - 1))
    def test_row_permutation_invariance(self, X, seed):
        rng = np.random.default_rng(seed)
        u = rng.normal(size=X.shape[0])
        perm = rng.permutation(X.shape[0])
        a = fit_tree(Dataset.from_arrays(X, np.ones(len(u))), u, 4, min_node=2)
        b = fit_tree(Dataset.from_arrays(X[perm], np.ones(len(u))), u[perm], 4, min_node=2)
        assert _canonical(a) == _canonical(b)


def _rows_under(tree, leaf, node):
    below = {int(node)}
    stack = [int(node)]
    while stack:
        k = stack.pop()
        if tree.left[k] >= 0:
            for c in (int(tree.left[k]), int(tree.right[k])):
                below.add(c)
                stack.append(c)
    return np.isin(leaf, sorted(below))


def _canonical(tree, node=0):
    """Tree structure independent of node numbering; floats rounded for
    summation-order noise."""
    if tree.left[node] < 0:
        return ("leaf", round(float(tree.value[node]), 9))
    rule = tree.rule(node)
    return (rule.feature, rule.threshold, rule.left_levels,
            _canonical(tree, tree.left[node]), _canonical(tree, tree.right[node]))


def test_backends_build_identical_trees(rng):
    from tdboost import _pykernels
    ck = pytest.importorskip("tdboost._ckernels")
    n = 400
    X = np.column_stack([rng.normal(size=n), rng.integers(0, 6, n), rng.uniform(size=n)])
    u = X[:, 0] * (X[:, 1] > 2) + rng.normal(size=n)
    data = Dataset.from_arrays(X, np.ones(n), categorical=[1])
    args = (data.Xt, data.order, data.is_cat, data.n_levels, u, 8, 5)
    a, b = _pykernels.grow_tree(*args), ck.grow_tree(*args)
    for key in a:
        np.testing.assert_allclose(np.asarray(a[key], dtype=float),
                                   np.asarray(b[key], dtype=float), rtol=1e-12, atol=1e-12)
    Z = np.ascontiguousarray(rng.normal(size=(3, 50)))
    Z[1] = rng.integers(-1, 8, 50)
    fields = ("feature", "threshold", "left", "right", "cat_offset", "cat_flags")
    assert np.array_equal(_pykernels.apply_tree(Z, data.n_levels, *[a[f] for f in fields]),
                          ck.apply_tree(Z, data.n_levels, *[b[f] for f in fields]))
