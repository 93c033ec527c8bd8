import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from treegarrote.data import Dataset, friedman1
from treegarrote.forest import (Forest, ForestParams, ModelError, default_mtry_candidates, fit_forest, fit_tree,
                                oob_mse, predict_forest, tune_mtry)


def _check_node_stats(tree, X, y):
    """Prediction statistics are means over every row routed to a node;
    nodes no row reaches inherit the parent's mean."""
    order, start, stop, count, _ = tree.membership(X, y)
    for j in range(tree.size):
        rows = order[start[j]:stop[j]]
        assert tree.n_node[j] == rows.size == count[j]
        if rows.size:
            assert tree.node_mean[j] == pytest.approx(y[rows].mean(), rel=1e-12, abs=1e-12)
        else:
            assert tree.node_mean[j] == tree.node_mean[tree.parent[j]]
        if tree.feature[j] >= 0:
            k, thr = tree.feature[j], tree.threshold[j]
            left = order[start[tree.left[j]]:stop[tree.left[j]]]
            right = order[start[tree.right[j]]:stop[tree.right[j]]]
            assert (X[left, k] < thr).all() and (X[right, k] >= thr).all()


def test_tree_structure(small_data, small_forest):
    X, y = small_data.X, small_data.y
    for t in small_forest.trees[:5]:
        leaves = t.is_leaf
        assert (t.left[leaves] < 0).all() and (t.left[~leaves] > 0).all()
        # both children of a split hold at least min_node bootstrap rows
        assert (t.fit_n[1:] >= 5).all()
        assert t.node_mean[0] == pytest.approx(y.mean())
        _check_node_stats(t, X, y)
        node = t.node(0)
        assert node.parent is None and node.split == (t.feature[0], t.threshold[0])


def test_single_tree_without_bootstrap_is_cart(rng):
    X = rng.uniform(size=(60, 2))
    y = (X[:, 0] > 0.5).astype(float) * 3.0
    t = fit_tree(X, y, 2, 5, 0, np.arange(60))
    assert t.feature[0] == 0
    assert abs(t.threshold[0] - 0.5) < 0.1
    np.testing.assert_allclose(t.predict(X), y)


def test_constant_response_gives_stump():
    X = np.random.default_rng(0).uniform(size=(30, 3))
    t = fit_tree(X, np.full(30, 2.0), 3, 2, 0, np.arange(30))
    assert t.size == 1


def test_predict_is_tree_average(small_data, small_forest):
    X = small_data.X[:7]
    avg = np.mean([t.predict(X) for t in small_forest.trees], axis=0)
    np.testing.assert_allclose(small_forest.predict(X), avg, rtol=1e-13)
    assert predict_forest(small_forest, X[0]) == pytest.approx(avg[0])


def test_seed_determinism(small_data):
    p = ForestParams(num_trees=5, mtry=2, seed=9)
    a, b = fit_forest(small_data, p), fit_forest(small_data, p)
    np.testing.assert_array_equal(a.predict(small_data.X), b.predict(small_data.X))
    c = fit_forest(small_data, ForestParams(num_trees=5, mtry=2, seed=10))
    assert not np.array_equal(a.predict(small_data.X), c.predict(small_data.X))


def test_json_round_trip(small_data, small_forest):
    doc = json.loads(json.dumps(small_forest.to_json()))
    f = Forest.from_json(doc)
    np.testing.assert_array_equal(f.predict(small_data.X), small_forest.predict(small_data.X))
    doc["schema_version"] = 2
    with pytest.raises(ModelError):
        Forest.from_json(doc)
    with pytest.raises(ModelError):
        Forest.from_json({"schema_version": 1, "kind": "garrote"})


def test_mtry_tuning_by_oob():
    d = friedman1(100, seed=3)
    assert default_mtry_candidates(10) == [4, 5, 10]
    assert default_mtry_candidates(1) == [1]
    params = ForestParams(num_trees=15, seed=2)
    m = tune_mtry(d, params=params)
    errs = {k: oob_mse(fit_forest(d, ForestParams(num_trees=15, mtry=k, seed=2)), d) for k in [4, 5, 10]}
    assert m == min(errs, key=lambda k: (errs[k], k))
    f = fit_forest(d, params)
    assert f.params.mtry == m


def test_input_shape_is_checked(small_forest):
    with pytest.raises(ValueError):
        small_forest.predict(np.zeros((2, 3)))


@given(n=st.integers(12, 60), seed=st.integers(0, 10_000), mn=st.integers(1, 6))
@settings(max_examples=25, deadline=None)
def test_min_node_and_leaf_means(n, seed, mn):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, 3)).round(1)  # ties in x
    y = rng.normal(size=n)
    d = Dataset.from_arrays(X, y)
    f = fit_forest(d, ForestParams(num_trees=3, mtry=2, min_node_size=mn, seed=seed))
    for t in f.trees:
        inner = ~t.is_leaf
        assert (t.fit_n[inner] >= 2 * mn).all()
        assert (t.fit_n[1:] >= mn).all()
        _check_node_stats(t, X, y)
