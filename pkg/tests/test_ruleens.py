import json

import numpy as np
import pytest
from scipy import sparse

from treegarrote.ruleens import (_path, lasso_from_json, lasso_kkt_violation, lasso_to_json, penalty_grid,
                                 predict_rule_lasso, rule_design, selected_variables, solve_rule_lasso)
from treegarrote.ruleset import Box, RuleSet, WeightedRule


def test_design_excludes_roots(small_data, small_rules):
    raw, _ = small_rules
    D = rule_design(raw, small_data.X)
    assert (np.diff(raw.ptr)[D.rule_ids] > 0).all()
    assert D.J == int((np.diff(raw.ptr) > 0).sum())
    np.testing.assert_array_equal(D.M[:, :5].toarray(), raw.take(D.rule_ids[:5]).indicators(small_data.X))


def test_orthogonal_design_is_soft_thresholding():
    # disjoint indicators: each column's lasso solution is a shrunken mean
    n = 40
    M = sparse.csc_matrix(np.kron(np.eye(4), np.ones((10, 1))))
    r = np.repeat([3.0, -1.0, 0.2, 0.0], 10) + np.tile(np.linspace(-0.1, 0.1, 10), 4)
    r -= r.mean()
    a = 0.05
    b = _path(M, r, np.array([a]), 1e-12, 200)[:, 0]
    z = M.T @ r / n  # per column: (10/n) * mean
    expected = np.sign(z) * np.maximum(np.abs(z) - a, 0) / 0.25
    np.testing.assert_allclose(b, expected, atol=1e-8)


def test_kkt_along_path(small_data, small_rules):
    raw, _ = small_rules
    D = rule_design(raw, small_data.X)
    r = small_data.y - small_data.y.mean()
    grid = penalty_grid(D.M, r, 8)
    assert grid[0] == pytest.approx(np.abs(D.M.T @ r).max() / small_data.n)
    C = _path(D.M, r, grid, 1e-10, 100)
    assert not C[:, 0].any()
    for i in (2, 5, 7):
        assert lasso_kkt_violation(D.M, r, C[:, i], grid[i]) < 1e-3


def test_cv_fit_and_prediction(small_data, small_rules):
    raw, _ = small_rules
    m = solve_rule_lasso(raw, small_data.X, small_data.y, folds=3, seed=2, n_penalties=10)
    assert m.cv_mse.shape == (10,)
    assert m.penalty == m.penalties[int(np.argmin(m.cv_mse))]
    assert m.intercept == pytest.approx(small_data.y.mean())
    pred = predict_rule_lasso(m, raw, small_data.X)
    assert float(((small_data.y - pred) ** 2).sum()) == pytest.approx(m.training_sse, rel=1e-9)
    assert m.budget == pytest.approx(sum(abs(v) for v in m.coefficients.values()))
    assert selected_variables(m, raw, small_data.columns) <= set(range(len(small_data.variables)))
    doc = json.loads(json.dumps(lasso_to_json(m, raw, small_data.columns, "y")))
    m2, rules2, cols, target = lasso_from_json(doc)
    np.testing.assert_allclose(predict_rule_lasso(m2, rules2, small_data.X), pred, atol=1e-12)


def test_fixed_penalty_without_cv(small_data, small_rules):
    raw, _ = small_rules
    m = solve_rule_lasso(raw, small_data.X, small_data.y, penalties=np.array([0.5]), folds=0)
    assert m.penalty == 0.5 and m.cv_mse is None


def test_only_root_rules():
    rs = RuleSet.from_rules([WeightedRule(Box(), 2.0)], 1)
    X = np.zeros((5, 1))
    y = np.arange(5.0)
    m = solve_rule_lasso(rs, X, y, folds=0)
    assert m.coefficients == {} and m.intercept == 2.0
    with pytest.raises(ValueError):
        solve_rule_lasso(RuleSet.empty(1), X, y)
