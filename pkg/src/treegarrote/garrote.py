"""Nonnegative garrote over the group functions of a rule decomposition.

Each active, non-intercept group ``g`` contributes a design column
``Z[:, g] = T_g(X_i)``. The multipliers solve

    min ||(y - intercept) - Z gamma||^2   s.t.  gamma >= 0,  mean(gamma) <= lam

where the mean runs over all ``G`` active groups. ``gamma = 1`` reproduces
the forest and is feasible for ``lam >= 1``, so at ``lam = 1`` the training
loss can only go down. Columns are deliberately left unscaled.

The solver traces the nonnegative LARS (positive lasso homotopy) path and
stops where ``sum(gamma)`` reaches ``G * lam``, interpolating inside the
final linear segment.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import sparse
from scipy.linalg import solve_triangular

from .data import Column, variable_index
from .forest import SCHEMA_VERSION, ModelError, check_schema
from .ruleset import GroupFit, InteractionPattern, RuleSet, evaluate_groups
from .seeding import rng_for

DEFAULT_CV_GRID = tuple(round(0.1 * k, 1) for k in range(1, 21))


@dataclass
class GroupDesign:
    Z: np.ndarray
    patterns: list[InteractionPattern]
    intercept: float
    groups: list[GroupFit] = field(default_factory=list, repr=False)

    @property
    def G(self) -> int:
        return self.Z.shape[1]

    @property
    def n(self) -> int:
        return self.Z.shape[0]


@dataclass
class GarroteModel:
    gamma: dict[InteractionPattern, float]
    intercept: float
    budget_used: float
    lam: float = 1.0
    n_groups: int = 0
    training_sse: float = float("nan")

    @property
    def patterns(self) -> list[InteractionPattern]:
        return list(self.gamma)


@dataclass
class PathPoint:
    l1: float  # normalised: sum(gamma) / G
    active: np.ndarray
    values: np.ndarray
    sse: float

    def dense(self, G: int) -> np.ndarray:
        g = np.zeros(G)
        g[self.active] = self.values
        return g


@dataclass
class SolverPath:
    breakpoints: list[PathPoint]
    G: int
    final: int = -1

    def gamma(self, i: int) -> np.ndarray:
        return self.breakpoints[i].dense(self.G)

    def at(self, l1: float) -> np.ndarray:
        """Path solution at normalised l1 norm ``l1`` (the last point if
        the path ends below it). Exact: the path is linear between
        breakpoints."""
        pts = self.breakpoints
        if l1 >= pts[-1].l1:
            return self.gamma(len(pts) - 1)
        knots = np.array([q.l1 for q in pts])
        i = int(np.searchsorted(knots, l1, side="right"))
        if i == 0:
            return self.gamma(0)
        a, b = pts[i - 1], pts[i]
        w = (l1 - a.l1) / (b.l1 - a.l1)
        g = (1 - w) * a.dense(self.G) + w * b.dense(self.G)
        return np.maximum(g, 0.0)


def build_design(groups: Sequence[GroupFit], X: np.ndarray) -> GroupDesign:
    """Design columns for the non-intercept groups; the all-zero pattern's
    constant value becomes the fixed intercept."""
    X = np.asarray(X, dtype=np.float64)
    intercept = 0.0
    rest = []
    for g in groups:
        if g.pattern.is_intercept:
            intercept += float(g.rules.beta.sum())
        else:
            rest.append(g)
    Z = evaluate_groups(rest, X) if rest else np.zeros((X.shape[0], 0))
    return GroupDesign(Z, [g.pattern for g in rest], intercept, rest)


def _transposed(Z) -> sparse.csr_matrix:
    """Columns of ``Z`` as rows of a CSR matrix (group columns are mostly
    zero, so correlations are much cheaper in sparse form)."""
    if sparse.issparse(Z):
        return sparse.csr_matrix(Z.T)
    return sparse.csr_matrix(np.asarray(Z, dtype=np.float64).T)


def _column(ZT: sparse.csr_matrix, j: int) -> np.ndarray:
    out = np.zeros(ZT.shape[1])
    s, e = ZT.indptr[j], ZT.indptr[j + 1]
    out[ZT.indices[s:e]] = ZT.data[s:e]
    return out


def _distinct_columns(Z) -> np.ndarray:
    """Mask of columns that are non-zero and not an exact copy of an
    earlier column."""
    ZT = _transposed(Z)
    ZT.eliminate_zeros()
    ZT.sort_indices()
    G = ZT.shape[0]
    keep = np.diff(ZT.indptr) > 0
    seen: dict[tuple[bytes, bytes], int] = {}
    n_dup = 0
    for j in np.flatnonzero(keep):
        s, e = ZT.indptr[j], ZT.indptr[j + 1]
        key = (ZT.indices[s:e].tobytes(), ZT.data[s:e].tobytes())
        if key in seen:
            keep[j] = False
            n_dup += 1
        else:
            seen[key] = j
    if n_dup:
        warnings.warn(f"{n_dup} group columns duplicate earlier ones on the training rows; "
                      "only the first copy enters the solver", stacklevel=3)
    return keep


class _ActiveSet:
    """Active columns and the upper Cholesky factor ``R`` of their Gram
    matrix (``Z_A' Z_A = R' R``), updated in place on additions and
    downdated by Givens rotations on removals."""

    def __init__(self, n: int, cap: int = 64):
        self.ZA = np.empty((n, cap), order="F")
        self.R = np.zeros((cap, cap))
        self.cols: list[int] = []

    @property
    def k(self) -> int:
        return len(self.cols)

    def _grow(self) -> None:
        cap = 2 * self.ZA.shape[1]
        ZA = np.empty((self.ZA.shape[0], cap), order="F")
        ZA[:, :self.k] = self.ZA[:, :self.k]
        R = np.zeros((cap, cap))
        R[:self.k, :self.k] = self.R[:self.k, :self.k]
        self.ZA, self.R = ZA, R

    def try_add(self, j: int, z: np.ndarray, rtol: float = 1e-10) -> bool:
        k = self.k
        zz = float(z @ z)
        if zz <= 0:
            return False
        if k:
            r = solve_triangular(self.R[:k, :k], self.ZA[:, :k].T @ z, trans="T", check_finite=False)
            d2 = zz - float(r @ r)
        else:
            r = np.zeros(0)
            d2 = zz
        if d2 <= rtol * zz:
            return False
        if k == self.ZA.shape[1]:
            self._grow()
        self.R[:k, k] = r
        self.R[k, :k] = 0.0
        self.R[k, k] = np.sqrt(d2)
        self.ZA[:, k] = z
        self.cols.append(int(j))
        return True

    def remove(self, pos: int) -> None:
        k = self.k
        H = np.delete(self.R[:k, :k], pos, axis=1)
        for i in range(pos, k - 1):
            a, b = H[i, i], H[i + 1, i]
            h = np.hypot(a, b)
            c, s = a / h, b / h
            top = H[i, i:].copy()
            bot = H[i + 1, i:]
            H[i, i:] = c * top + s * bot
            H[i + 1, i:] = c * bot - s * top
        self.R[:k, :k] = 0.0
        self.R[:k - 1, :k - 1] = H[:k - 1]
        self.ZA[:, pos:k - 1] = self.ZA[:, pos + 1:k]
        del self.cols[pos]

    def solve_ones(self) -> np.ndarray:
        R = self.R[:self.k, :self.k]
        u = solve_triangular(R, np.ones(self.k), trans="T", check_finite=False)
        return solve_triangular(R, u, check_finite=False)


def nonneg_lars(Z, r: np.ndarray, budget: float, max_steps: int | None = None,
                eligible: np.ndarray | None = None) -> tuple[np.ndarray, list[PathPoint], str]:
    """Positive-lasso homotopy for ``min ||r - Z g||^2, g >= 0, sum(g) <= budget``.

    ``Z`` may be dense or scipy-sparse. Returns the final ``g``, the
    breakpoints (with *unnormalised* l1) and the stopping reason:
    ``"budget"``, ``"optimum"`` (unconstrained NNLS point reached) or
    ``"max_steps"``.
    """
    n, G = Z.shape
    g = np.zeros(G)
    r = np.asarray(r, dtype=np.float64)
    res = r.copy()
    pts = [PathPoint(0.0, np.zeros(0, np.int64), np.zeros(0), float(res @ res))]
    if G == 0 or budget <= 0:
        return g, pts, "budget" if budget <= 0 else "optimum"
    ZT = _transposed(Z)
    ok = eligible.copy() if eligible is not None else np.ones(G, dtype=bool)
    c = ZT @ res
    scale = float(np.max(np.abs(c)))
    if not ok.any() or scale == 0.0 or np.max(np.where(ok, c, -np.inf)) <= 0:
        return g, pts, "optimum"
    act = _ActiveSet(n)
    inactive = ok.copy()
    if max_steps is None:
        max_steps = 8 * min(n, G) + 100
    eps = 1e-12 * scale

    # first entrant: largest correlation, lowest index among ties
    while True:
        masked = np.where(inactive, c, -np.inf)
        C = float(masked.max())
        if not C > 0:
            return g, pts, "optimum"
        j = int(np.flatnonzero(masked >= C - eps)[0])
        inactive[j] = False
        if act.try_add(j, _column(ZT, j)):
            break
        ok[j] = False
    just_dropped = -1
    reason = "max_steps"
    excluded: list[int] = []
    for step in range(max_steps):
        A = np.array(act.cols)
        k = act.k
        d = act.solve_ones()
        w = act.ZA[:, :k] @ d
        a = ZT @ w
        # entry: an inactive correlation c_j - t a_j catches up with C - t
        cand = inactive.copy()
        if just_dropped >= 0:
            cand[just_dropped] = False
        denom = 1.0 - a
        cand &= denom > 1e-14
        t_in = np.full(G, np.inf)
        t_in[cand] = np.maximum((C - c[cand]) / denom[cand], 0.0)
        t_entry = float(t_in.min()) if cand.any() else np.inf
        # drop: an active coefficient hits zero
        gA = g[A]
        neg = d < 0
        t_drop = np.inf
        drop_pos = -1
        if neg.any():
            td = np.where(neg, -gA / np.where(neg, d, 1.0), np.inf)
            drop_pos = int(np.argmin(td))
            t_drop = float(td[drop_pos])
        t_end = C
        sd = float(d.sum())
        t_budget = (budget - float(gA.sum())) / sd if sd > 0 else np.inf
        t = min(t_entry, t_drop, t_end, t_budget)
        g[A] = gA + t * d
        res -= t * w
        c -= t * a
        C -= t
        just_dropped = -1
        if t == t_budget:
            g[g < 0] = 0.0
            s = g.sum()
            if s > budget:
                g *= budget / s
            reason = "budget"
        elif t == t_end:
            reason = "optimum"
        elif t == t_drop:
            j = int(A[drop_pos])
            g[j] = 0.0
            act.remove(drop_pos)
            inactive[j] = True
            just_dropped = j
        else:
            j = int(np.flatnonzero(t_in <= t_entry + 1e-12 * max(t_entry, 1.0))[0])
            inactive[j] = False
            if not act.try_add(j, _column(ZT, j)):
                ok[j] = False
                excluded.append(j)
        if step % 25 == 24:
            # refresh residual and correlations against drift
            res = r - act.ZA[:, :act.k] @ g[np.array(act.cols, dtype=np.int64)]
            c = ZT @ res
        nz = np.flatnonzero(g > 0)
        l1 = float(g.sum())
        sse = float(res @ res)
        if l1 > pts[-1].l1:
            pts.append(PathPoint(l1, nz, g[nz].copy(), sse))
        else:
            pts[-1] = PathPoint(pts[-1].l1, nz, g[nz].copy(), sse)
        if reason != "max_steps":
            break
        if not act.cols:
            reason = "optimum"
            break
    else:
        warnings.warn("nonnegative LARS hit its step limit; returning the last iterate", stacklevel=2)
    if excluded:
        warnings.warn(f"{len(excluded)} group columns are linearly dependent on the active set and were "
                      f"excluded (first: {excluded[:5]})", stacklevel=2)
    return g, pts, reason


def solve_garrote(d: GroupDesign, y: np.ndarray, lam: float = 1.0) -> tuple[GarroteModel, SolverPath]:
    """Garrote multipliers at normalised l1 budget ``lam`` (``1`` by default)."""
    if not lam > 0:
        raise ValueError("lam must be positive")
    y = np.asarray(y, dtype=np.float64)
    if not (np.all(np.isfinite(d.Z)) and np.all(np.isfinite(y))):
        raise ValueError("design and response must be finite")
    r = y - d.intercept
    G = d.G
    if G == 0:
        warnings.warn("no active groups besides the intercept; nothing to select", stacklevel=2)
        sse = float(r @ r)
        return (GarroteModel({}, d.intercept, 0.0, lam, 0, sse),
                SolverPath([PathPoint(0.0, np.zeros(0, np.int64), np.zeros(0), sse)], 0, 0))
    gamma, pts, _ = nonneg_lars(d.Z, r, lam * G, eligible=_distinct_columns(d.Z))
    for q in pts:
        q.l1 /= G
    resid = r - d.Z @ gamma
    model = GarroteModel(
        gamma={d.patterns[j]: float(gamma[j]) for j in np.flatnonzero(gamma > 0)},
        intercept=d.intercept,
        budget_used=float(gamma.sum()) / G,
        lam=lam,
        n_groups=G,
        training_sse=float(resid @ resid),
    )
    return model, SolverPath(pts, G, len(pts) - 1)


def gamma_vector(m: GarroteModel, patterns: Sequence[InteractionPattern]) -> np.ndarray:
    return np.array([m.gamma.get(s, 0.0) for s in patterns])


def cv_folds(n: int, folds: int, seed: int) -> np.ndarray:
    if folds < 2:
        raise ValueError("need at least 2 folds")
    if folds > n:
        raise ValueError(f"{folds} folds but only {n} rows; some fold would be empty")
    perm = rng_for(seed, "cv").permutation(n)
    fold = np.empty(n, dtype=np.int64)
    fold[perm] = np.arange(n) % folds
    return fold


def cv_errors(d: GroupDesign, y: np.ndarray, folds: int = 10,
              lambda_grid: Sequence[float] = DEFAULT_CV_GRID, seed: int = 0) -> np.ndarray:
    """Pooled held-out mean squared error per grid value; the design (and
    hence ``G``) is fixed, only ``gamma`` is refit on each training fold."""
    grid = np.asarray(lambda_grid, dtype=np.float64)
    if grid.size == 0 or np.any(grid <= 0):
        raise ValueError("lambda grid must be non-empty and positive")
    y = np.asarray(y, dtype=np.float64)
    r = y - d.intercept
    fold = cv_folds(d.n, folds, seed)
    Zs = sparse.csr_matrix(d.Z)
    sq = np.zeros(grid.size)
    for k in range(folds):
        tr = fold != k
        te = ~tr
        if not te.any() or not tr.any():
            raise ValueError("a cross-validation fold has no rows")
        Ztr = Zs[tr]
        _, pts, _ = nonneg_lars(Ztr, r[tr], grid.max() * d.G, eligible=_distinct_columns(Ztr))
        for q in pts:
            q.l1 /= d.G
        path = SolverPath(pts, d.G)
        for i, lam in enumerate(grid):
            e = r[te] - Zs[te] @ path.at(lam)
            sq[i] += float(e @ e)
    return sq / d.n


def solve_garrote_cv(d: GroupDesign, y: np.ndarray, folds: int = 10,
                     lambda_grid: Sequence[float] = DEFAULT_CV_GRID, seed: int = 0) -> GarroteModel:
    """Pick ``lam`` by K-fold cross-validation, then refit on all rows.
    Ties favour the smaller (sparser) ``lam``."""
    grid = np.asarray(lambda_grid, dtype=np.float64)
    if d.G == 0:
        return solve_garrote(d, y, 1.0)[0]
    err = cv_errors(d, y, folds, grid, seed)
    best = err.min()
    cands = grid[err <= best]
    lam = float(cands.min())
    return solve_garrote(d, y, lam)[0]


def predict_garrote(m: GarroteModel, groups: Sequence[GroupFit], x) -> float | np.ndarray:
    """``intercept + sum(gamma_g * T_g(x))`` over the selected groups."""
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    X = x[None, :] if single else x
    by_pattern = {g.pattern: g for g in groups}
    missing = [s for s in m.gamma if s not in by_pattern]
    if missing:
        raise KeyError(f"model pattern {missing[0]} is not among the supplied groups")
    sel = [by_pattern[s] for s in m.gamma]
    out = np.full(X.shape[0], m.intercept)
    if sel:
        out += evaluate_groups(sel, X) @ np.array(list(m.gamma.values()))
    return float(out[0]) if single else out


def selected_variables(m: GarroteModel, columns: Sequence[Column] | None = None) -> set[int]:
    """Variables touched by any pattern with a positive multiplier.

    With ``columns`` the encoded column indices are mapped back to original
    variables, so all dummies of a factor count once.
    """
    cols = {k for s, v in m.gamma.items() if v > 0 for k in s.variables}
    if columns is None:
        return cols
    vi = variable_index(columns)
    return {vi[k] for k in cols}


def kkt_violation(Z: np.ndarray, r: np.ndarray, gamma: np.ndarray, budget: float) -> float:
    """Largest violation of the optimality conditions, relative to the
    largest column correlation at zero.

    With ``c = Z'(r - Z gamma)`` and ``mu = max(c)`` if the budget binds
    (else ``0``): ``c_j = mu`` where ``gamma_j > 0`` and ``c_j <= mu``
    elsewhere.
    """
    c = Z.T @ (r - Z @ gamma)
    scale = max(float(np.max(np.abs(Z.T @ r))), 1e-300)
    pos = gamma > 0
    binding = gamma.sum() >= budget * (1 - 1e-9)
    if binding:
        mu = float(c[pos].mean()) if pos.any() else float(c.max())
        mu = max(mu, 0.0)
    else:
        mu = 0.0
    v_pos = np.abs(c[pos] - mu).max() if pos.any() else 0.0
    v_zero = max(float((c[~pos] - mu).max()), 0.0) if (~pos).any() else 0.0
    return max(v_pos, v_zero) / scale


def garrote_to_json(m: GarroteModel, groups: Sequence[GroupFit], columns: Sequence[Column],
                    target: str = "y") -> dict:
    """Self-contained model document: multipliers plus the rules of every
    selected group, so predictions need no other artifact."""
    by_pattern = {g.pattern: g for g in groups}
    return {
        "schema_version": SCHEMA_VERSION,
        "kind": "garrote",
        "intercept": m.intercept,
        "lambda": m.lam,
        "budget_used": m.budget_used,
        "training_sse": m.training_sse,
        "n_groups": m.n_groups,
        "target": target,
        "columns": [c.to_json() for c in columns],
        "groups": [{"signs": list(s.signs), "gamma": v, "rules": by_pattern[s].rules.to_json()}
                   for s, v in m.gamma.items()],
    }


def garrote_from_json(d: dict) -> tuple[GarroteModel, list[GroupFit], list[Column]]:
    check_schema(d, "garrote")
    columns = [Column.from_json(c) for c in d["columns"]]
    p = len(columns)
    gamma, groups = {}, []
    for item in d["groups"]:
        s = InteractionPattern(tuple(int(v) for v in item["signs"]))
        if len(s.signs) != p:
            raise ModelError(f"pattern of length {len(s.signs)} does not match {p} columns")
        gamma[s] = float(item["gamma"])
        groups.append(GroupFit(s, RuleSet.from_json(item["rules"], p)))
    m = GarroteModel(gamma, float(d["intercept"]), float(d["budget_used"]), float(d["lambda"]),
                     int(d.get("n_groups", len(gamma))), float(d.get("training_sse", float("nan"))))
    return m, groups, columns
