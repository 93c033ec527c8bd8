import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from treegarrote.garrote import (DEFAULT_CV_GRID, GroupDesign, build_design, cv_errors, cv_folds, garrote_from_json,
                                 garrote_to_json, gamma_vector, kkt_violation, nonneg_lars, predict_garrote,
                                 selected_variables, solve_garrote, solve_garrote_cv)
from treegarrote.forest import ModelError
from treegarrote.ruleset import evaluate_groups

from oracles import garrote_oracle


def _objective(Z, r, g):
    e = r - Z @ g
    return float(e @ e)


@pytest.fixture(scope="module")
def design(small_data, small_groups):
    return build_design(small_groups, small_data.X)


def test_design_separates_intercept(small_data, small_groups, design):
    assert not any(s.is_intercept for s in design.patterns)
    assert design.G == len(small_groups) - 1
    assert design.intercept == pytest.approx(small_data.y.mean())
    np.testing.assert_allclose(design.intercept + design.Z.sum(axis=1),
                               evaluate_groups(small_groups, small_data.X).sum(axis=1), atol=1e-12)


@given(seed=st.integers(0, 10_000), n=st.integers(3, 30), G=st.integers(1, 5), lam=st.floats(0.05, 3.0))
@settings(max_examples=25, deadline=None)
def test_matches_oracle(seed, n, G, lam):
    rng = np.random.default_rng(seed)
    Z = rng.normal(size=(n, G))
    r = Z @ rng.uniform(0, 1, G) + 0.5 * rng.normal(size=n)
    g, _, _ = nonneg_lars(Z, r, lam * G)
    go, fo = garrote_oracle(Z, r, lam * G, iters=20_000)
    f = _objective(Z, r, g)
    assert (g >= 0).all() and g.sum() <= lam * G * (1 + 1e-12)
    assert f <= fo * (1 + 1e-6) + 1e-9


def test_kkt_on_forest_design(small_data, design):
    m, path = solve_garrote(design, small_data.y, 1.0)
    g = gamma_vector(m, design.patterns)
    r = small_data.y - design.intercept
    assert (g >= 0).all()
    assert g.sum() <= design.G * (1 + 1e-9)
    assert kkt_violation(design.Z, r, g, design.G) < 1e-7
    assert m.training_sse == pytest.approx(_objective(design.Z, r, g), rel=1e-9)
    # gamma = 1 (the forest itself) is feasible, so the fit can only improve
    assert m.training_sse <= _objective(design.Z, r, np.ones(design.G)) + 1e-9


def test_path_is_monotone_and_interpolates(small_data, design):
    y = small_data.y
    _, path = solve_garrote(design, y, 0.5)
    l1 = [q.l1 for q in path.breakpoints]
    assert all(b >= a - 1e-12 for a, b in zip(l1, l1[1:]))
    sse = [q.sse for q in path.breakpoints]
    assert all(b <= a * (1 + 1e-9) + 1e-9 for a, b in zip(sse, sse[1:]))
    for lam in (0.1, 0.25, 0.5):
        direct = gamma_vector(solve_garrote(design, y, lam)[0], design.patterns)
        np.testing.assert_allclose(path.at(lam), direct, atol=1e-7)


def test_budget_binds_for_small_lambda(small_data, design):
    m, _ = solve_garrote(design, small_data.y, 0.01)
    assert m.budget_used == pytest.approx(0.01, rel=1e-9)


def test_duplicate_columns_do_not_break_solver(rng):
    Z = rng.normal(size=(20, 3))
    Z = np.column_stack([Z, Z[:, 0]])
    r = Z[:, 0] * 2 + rng.normal(size=20) * 0.1
    g, _, _ = nonneg_lars(Z, r, 100.0)
    go, fo = garrote_oracle(Z, r, 100.0, iters=50_000)
    assert _objective(Z, r, g) <= fo * (1 + 1e-6) + 1e-9


def test_all_negative_correlations_give_zero(rng):
    Z = np.abs(rng.normal(size=(15, 3)))
    r = -Z.sum(axis=1)
    g, pts, reason = nonneg_lars(Z, r, 3.0)
    assert not g.any()


def test_empty_design_and_bad_lambda(small_data):
    d = GroupDesign(np.zeros((small_data.n, 0)), [], 1.5, [])
    with pytest.warns(UserWarning):
        m, _ = solve_garrote(d, small_data.y)
    assert m.gamma == {} and m.intercept == 1.5
    with pytest.raises(ValueError):
        solve_garrote(d, small_data.y, 0.0)


def test_cv_picks_grid_value(small_data, design):
    grid = (0.25, 0.5, 1.0)
    err = cv_errors(design, small_data.y, 4, grid, seed=1)
    assert err.shape == (3,) and np.isfinite(err).all()
    m = solve_garrote_cv(design, small_data.y, 4, grid, seed=1)
    assert m.lam == grid[int(np.argmin(err))]
    assert DEFAULT_CV_GRID[0] == 0.1 and DEFAULT_CV_GRID[-1] == 2.0 and len(DEFAULT_CV_GRID) == 20


def test_cv_folds():
    f = cv_folds(23, 5, 0)
    assert np.bincount(f).tolist() == [5, 5, 5, 4, 4]
    np.testing.assert_array_equal(f, cv_folds(23, 5, 0))
    with pytest.raises(ValueError):
        cv_folds(3, 5, 0)
    with pytest.raises(ValueError):
        cv_folds(10, 1, 0)


def test_prediction_and_json(small_data, small_groups, design):
    m, _ = solve_garrote(design, small_data.y, 1.0)
    pred = predict_garrote(m, small_groups, small_data.X)
    r = small_data.y - pred
    assert float(r @ r) == pytest.approx(m.training_sse, rel=1e-9)
    assert predict_garrote(m, small_groups, small_data.X[0]) == pytest.approx(pred[0])
    doc = json.loads(json.dumps(garrote_to_json(m, small_groups, small_data.columns)))
    m2, groups2, cols = garrote_from_json(doc)
    np.testing.assert_array_equal(predict_garrote(m2, groups2, small_data.X), pred)
    assert selected_variables(m2, cols) == selected_variables(m, small_data.columns)
    doc["kind"] = "forest"
    with pytest.raises(ModelError):
        garrote_from_json(doc)
    with pytest.raises(KeyError):
        predict_garrote(m, small_groups[:1], small_data.X)
