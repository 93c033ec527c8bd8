"""Lasso over individual rules, the baseline the garrote is compared with.

The design holds raw rule indicators (not weighted by the node
coefficients), one column per non-root node. The intercept is fixed at the
training mean and the centred response is regressed on the indicators by
working-set coordinate descent along a decreasing penalty grid; the penalty is chosen
by K-fold cross-validation.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from skglm import Lasso

from .data import Column, variable_index
from .forest import SCHEMA_VERSION, ModelError, check_schema
from .garrote import cv_folds
from .ruleset import RuleSet, sparse_indicators


@dataclass
class LassoModel:
    coefficients: dict[int, float]  # rule id -> coefficient
    intercept: float
    budget: float  # sum of |coefficients|
    penalty: float
    training_sse: float = float("nan")
    penalties: np.ndarray | None = field(default=None, repr=False)
    cv_mse: np.ndarray | None = field(default=None, repr=False)

    @property
    def n_rules(self) -> int:
        return len(self.coefficients)


@dataclass
class RuleDesign:
    M: sparse.csc_matrix  # (n, J) indicators of the kept rules
    rule_ids: np.ndarray  # column -> index into the input rule set

    @property
    def J(self) -> int:
        return self.M.shape[1]


def rule_design(rules: RuleSet, X: np.ndarray) -> RuleDesign:
    """Indicators of the non-root rules; columns that are zero on ``X`` are
    dropped with a warning."""
    nonroot = np.flatnonzero(np.diff(rules.ptr) > 0)
    M = sparse_indicators(rules.take(nonroot), X)
    nnz = np.diff(M.indptr)
    keep = nnz > 0
    if not keep.all():
        warnings.warn(f"{int((~keep).sum())} rule columns are zero on the training rows and were dropped",
                      stacklevel=2)
        M = M[:, np.flatnonzero(keep)]
    return RuleDesign(sparse.csc_matrix(M), nonroot[keep])


def penalty_grid(M, r: np.ndarray, n_penalties: int = 50, ratio: float = 1e-3) -> np.ndarray:
    """Geometric grid from the smallest penalty giving the empty model down
    to ``ratio`` times that value (scikit-learn's penalty scaling)."""
    n = M.shape[0]
    pmax = float(np.max(np.abs(M.T @ r))) / n
    if pmax <= 0:
        return np.array([1.0])
    return np.geomspace(pmax, pmax * ratio, n_penalties)


def _path(M, r, penalties, tol, max_iter):
    """Warm-started working-set coordinate descent along ``penalties``
    (decreasing); returns ``(J, len(penalties))`` coefficients."""
    est = Lasso(alpha=float(penalties[0]), fit_intercept=False, warm_start=True, tol=tol, max_iter=max_iter)
    out = np.zeros((M.shape[1], len(penalties)))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        for i, a in enumerate(penalties):
            est.alpha = float(a)
            est.fit(M, r)
            out[:, i] = est.coef_
    return out


def solve_rule_lasso(rules: RuleSet, X: np.ndarray, y: np.ndarray, penalties: np.ndarray | None = None,
                     folds: int = 10, seed: int = 0, n_penalties: int = 50, tol: float = 1e-6,
                     max_iter: int = 50, design: RuleDesign | None = None) -> LassoModel:
    """Cross-validated lasso over raw rule indicators.

    With ``folds=0`` no cross-validation is run and the smallest penalty of
    the grid is used (a single fixed ``penalties`` value gives a plain lasso
    fit). Ties in CV error go to the larger penalty.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if len(rules) == 0:
        raise ValueError("rule list is empty")
    D = design if design is not None else rule_design(rules, X)
    mu = float(y.mean())
    r = y - mu
    if D.J == 0:
        return LassoModel({}, mu, 0.0, 0.0, float(r @ r))
    grid = penalty_grid(D.M, r, n_penalties) if penalties is None else np.sort(np.asarray(penalties, float))[::-1]
    cv_mse = None
    if folds and grid.size > 1:
        fold = cv_folds(D.M.shape[0], folds, seed)
        Mr = sparse.csr_matrix(D.M)
        sq = np.zeros(grid.size)
        for k in range(folds):
            tr, te = fold != k, fold == k
            mtr = float(y[tr].mean())
            coefs = _path(sparse.csc_matrix(Mr[tr]), y[tr] - mtr, grid, tol, max_iter)
            pred = mtr + Mr[te] @ coefs
            sq += ((y[te][:, None] - pred) ** 2).sum(axis=0)
        cv_mse = sq / D.M.shape[0]
        best = int(np.flatnonzero(cv_mse <= cv_mse.min())[0])  # grid is decreasing
    else:
        best = grid.size - 1
    coefs = _path(D.M, r, grid[: best + 1], tol, max_iter)[:, best]
    nz = np.flatnonzero(coefs != 0.0)
    e = r - D.M @ coefs
    return LassoModel(
        coefficients={int(D.rule_ids[j]): float(coefs[j]) for j in nz},
        intercept=mu,
        budget=float(np.abs(coefs).sum()),
        penalty=float(grid[best]),
        training_sse=float(e @ e),
        penalties=grid,
        cv_mse=cv_mse,
    )


def predict_rule_lasso(m: LassoModel, rules: RuleSet, x) -> float | np.ndarray:
    """``intercept + sum(coef_j * R_j(x))``."""
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    X = x[None, :] if single else x
    ids = np.array(sorted(m.coefficients), dtype=np.int64)
    out = np.full(X.shape[0], m.intercept)
    if ids.size:
        if ids.max() >= len(rules):
            raise KeyError(f"model refers to rule {int(ids.max())} but only {len(rules)} rules were given")
        sub = rules.take(ids)
        sub.beta = np.array([m.coefficients[int(i)] for i in ids])
        out += sub.evaluate(X)
    return float(out[0]) if single else out


def selected_variables(m: LassoModel, rules: RuleSet, columns=None) -> set[int]:
    cols: set[int] = set()
    for i in m.coefficients:
        s, e = rules.ptr[i], rules.ptr[i + 1]
        cols.update(int(k) for k in rules.var[s:e])
    if columns is None:
        return cols
    vi = variable_index(columns)
    return {vi[k] for k in cols}


def lasso_kkt_violation(M, r: np.ndarray, coefs: np.ndarray, penalty: float) -> float:
    """Largest violation of the lasso optimality conditions for
    ``(1/2n)||r - M b||^2 + penalty*||b||_1``, relative to ``penalty``."""
    n = M.shape[0]
    g = M.T @ (r - M @ coefs) / n
    nz = coefs != 0
    v1 = np.abs(g[nz] - penalty * np.sign(coefs[nz])).max() if nz.any() else 0.0
    v0 = max(float(np.abs(g[~nz]).max()) - penalty, 0.0) if (~nz).any() else 0.0
    return max(v1, v0) / penalty


def lasso_to_json(m: LassoModel, rules: RuleSet, columns, target: str) -> dict:
    """Self-contained model: only the rules with nonzero coefficients are
    stored, renumbered in increasing order of their original ids."""
    ids = np.array(sorted(m.coefficients), dtype=np.int64)
    sub = rules.take(ids)
    sub.beta = np.array([m.coefficients[int(i)] for i in ids])
    return {
        "schema_version": SCHEMA_VERSION,
        "kind": "rule-lasso",
        "target": target,
        "columns": [c.to_json() for c in columns],
        "intercept": m.intercept,
        "penalty": m.penalty,
        "budget": m.budget,
        "training_sse": m.training_sse,
        "rules": sub.to_json(),
    }


def lasso_from_json(d: dict) -> tuple[LassoModel, RuleSet, list[Column], str]:
    check_schema(d, "rule-lasso")
    try:
        columns = [Column.from_json(c) for c in d["columns"]]
        rules = RuleSet.from_json(d["rules"], len(columns))
        m = LassoModel({i: float(b) for i, b in enumerate(rules.beta)}, float(d["intercept"]),
                       float(d["budget"]), float(d["penalty"]), float(d["training_sse"]))
    except (KeyError, TypeError) as e:
        raise ModelError(f"malformed rule-lasso model: {e}") from e
    return m, rules, columns, d["target"]
