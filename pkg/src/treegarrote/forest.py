"""Random-forest regression: CART trees on bootstrap samples with a random
subset of ``mtry`` candidate columns at every node.

Two sets of node statistics are kept per tree:

* ``fit_n`` / ``fit_mean`` -- counts and means over the bootstrap sample the
  tree was grown on. Out-of-bag error uses these.
* ``n_node`` / ``node_mean`` -- counts and means over the original training
  rows routed down the fitted tree. Predictions and rule coefficients use
  these, so the rule decomposition of the forest is exact.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, replace
from typing import Sequence

import numpy as np

from . import _cart
from .data import Column, Dataset, variable_index
from .seeding import int_seed, rng_for

SCHEMA_VERSION = 1


class ModelError(ValueError):
    """Raised for unreadable or incompatible model artifacts."""


@dataclass(frozen=True)
class ForestParams:
    num_trees: int = 500
    mtry: int | None = None  # None: tune by out-of-bag error
    min_node_size: int = 5
    seed: int = 0
    bootstrap: bool = True


@dataclass(frozen=True)
class TreeNode:
    id: int
    parent: int | None
    split: tuple[int, float] | None
    children: tuple[int, int] | None
    node_mean: float
    n_node: int


@dataclass
class Tree:
    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    parent: np.ndarray
    node_mean: np.ndarray
    n_node: np.ndarray
    fit_mean: np.ndarray | None = None
    fit_n: np.ndarray | None = None
    inbag: np.ndarray | None = field(default=None, repr=False)

    @property
    def size(self) -> int:
        return self.feature.shape[0]

    @property
    def is_leaf(self) -> np.ndarray:
        return self.feature < 0

    def node(self, j: int) -> TreeNode:
        leaf = self.feature[j] < 0
        return TreeNode(
            id=j,
            parent=None if j == 0 else int(self.parent[j]),
            split=None if leaf else (int(self.feature[j]), float(self.threshold[j])),
            children=None if leaf else (int(self.left[j]), int(self.right[j])),
            node_mean=float(self.node_mean[j]),
            n_node=int(self.n_node[j]),
        )

    def nodes(self) -> list[TreeNode]:
        return [self.node(j) for j in range(self.size)]

    def depth(self) -> np.ndarray:
        d = np.zeros(self.size, dtype=np.int64)
        for j in range(1, self.size):
            d[j] = d[self.parent[j]] + 1
        return d

    def apply(self, X: np.ndarray) -> np.ndarray:
        return _cart.apply_tree(np.ascontiguousarray(X, dtype=np.float64),
                                self.feature, self.threshold, self.left, self.right)

    def predict(self, X: np.ndarray) -> np.ndarray:
        return self.node_mean[self.apply(X)]

    def membership(self, X: np.ndarray, y: np.ndarray):
        """``(order, start, stop, count, mean)`` for rows of ``X`` routed down
        the tree; rows at node ``j`` are ``order[start[j]:stop[j]]``."""
        return _cart.node_membership(
            np.ascontiguousarray(X, dtype=np.float64), np.ascontiguousarray(y, dtype=np.float64),
            self.feature, self.threshold, self.left, self.right, self.parent,
        )

    def to_json(self) -> dict:
        return {
            "feature": self.feature.tolist(),
            "threshold": self.threshold.tolist(),
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "parent": self.parent.tolist(),
            "node_mean": self.node_mean.tolist(),
            "n_node": self.n_node.tolist(),
        }

    @classmethod
    def from_json(cls, d: dict) -> "Tree":
        i64 = lambda k: np.asarray(d[k], dtype=np.int64)
        f64 = lambda k: np.asarray(d[k], dtype=np.float64)
        return cls(i64("feature"), f64("threshold"), i64("left"), i64("right"), i64("parent"),
                   f64("node_mean"), i64("n_node"))


@dataclass
class Forest:
    trees: list[Tree]
    params: ForestParams
    columns: list[Column]
    target: str = "y"

    @property
    def num_trees(self) -> int:
        return len(self.trees)

    @property
    def p(self) -> int:
        return len(self.columns)

    def predict(self, X: np.ndarray) -> np.ndarray:
        X = np.ascontiguousarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.p:
            raise ValueError(f"expected rows with {self.p} entries, got shape {X.shape}")
        out = np.zeros(X.shape[0])
        for t in self.trees:
            _cart.accumulate_tree(X, t.feature, t.threshold, t.left, t.right, t.node_mean, out)
        return out / self.num_trees

    def used_columns(self) -> set[int]:
        used: set[int] = set()
        for t in self.trees:
            used.update(np.unique(t.feature[t.feature >= 0]).tolist())
        return used

    def selected_variables(self) -> set[int]:
        """Original variables appearing in at least one split."""
        vi = variable_index(self.columns)
        return {vi[j] for j in self.used_columns()}

    def oob_predictions(self, X: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Per-row out-of-bag mean prediction (from bootstrap leaf means) and
        the number of trees contributing."""
        n = X.shape[0]
        tot = np.zeros(n)
        cnt = np.zeros(n, dtype=np.int64)
        for t in self.trees:
            if t.inbag is None or t.fit_mean is None:
                raise ModelError("out-of-bag statistics are not available for this forest")
            out = t.inbag == 0
            if not out.any():
                continue
            leaves = t.apply(X[out])
            tot[out] += t.fit_mean[leaves]
            cnt[out] += 1
        with np.errstate(invalid="ignore", divide="ignore"):
            return tot / cnt, cnt

    def to_json(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "kind": "forest",
            "params": asdict(self.params),
            "target": self.target,
            "columns": [c.to_json() for c in self.columns],
            "trees": [t.to_json() for t in self.trees],
        }

    @classmethod
    def from_json(cls, d: dict) -> "Forest":
        check_schema(d, "forest")
        return cls(
            trees=[Tree.from_json(t) for t in d["trees"]],
            params=ForestParams(**d["params"]),
            columns=[Column.from_json(c) for c in d["columns"]],
            target=d.get("target", "y"),
        )


def check_schema(d: dict, kind: str) -> None:
    if not isinstance(d, dict):
        raise ModelError("model file is not a JSON object")
    if d.get("schema_version") != SCHEMA_VERSION:
        raise ModelError(
            f"schema_version {d.get('schema_version')!r} is not supported (expected {SCHEMA_VERSION})"
        )
    if d.get("kind") != kind:
        raise ModelError(f"expected a {kind!r} artifact, got {d.get('kind')!r}")


def fit_tree(X: np.ndarray, y: np.ndarray, mtry: int, min_node_size: int,
             rng: np.random.Generator | int, sample: np.ndarray | None = None) -> Tree:
    """Grow a single regression tree.

    Splits minimise the children's summed squared error over a random
    ``mtry``-subset of columns; a node of fewer than ``2*min_node_size`` rows
    is a leaf, and so is any node where no split lowers the error. Node
    statistics are then recomputed on all rows of ``X``.
    """
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.float64)
    n, p = X.shape
    if n == 0:
        raise ValueError("cannot fit a tree on empty input")
    if not 1 <= mtry <= p:
        raise ValueError(f"mtry must lie in [1, {p}], got {mtry}")
    if min_node_size < 1:
        raise ValueError("min_node_size must be at least 1")
    if isinstance(rng, (int, np.integer)):
        seed = int(rng)
    else:
        seed = int(rng.integers(0, 2**31 - 1))
    if sample is None:
        sample = np.arange(n, dtype=np.int64)
    feature, threshold, left, right, parent, fit_n, fit_mean = _cart.grow_tree(
        X, y, np.asarray(sample, dtype=np.int64), int(mtry), int(min_node_size), seed)
    tree = Tree(feature, threshold, left, right, parent, fit_mean.copy(), fit_n.copy(), fit_mean, fit_n)
    _, _, _, count, mean = tree.membership(X, y)
    tree.n_node = count
    tree.node_mean = mean
    tree.inbag = np.bincount(sample, minlength=n)
    return tree


def fit_forest(d: Dataset, params: ForestParams = ForestParams()) -> Forest:
    """Fit ``num_trees`` trees, tree ``b`` on a bootstrap sample drawn from
    a stream seeded by ``(seed, b)``.

    With ``params.mtry=None`` the candidate values are compared by
    out-of-bag error first (see :func:`tune_mtry`).
    """
    if params.mtry is None:
        _, forest = _tune(d, default_mtry_candidates(d.p), params)
        return forest
    mtry = min(params.mtry, d.p)
    trees = []
    for b in range(params.num_trees):
        rng = rng_for(params.seed, "forest", b)
        if params.bootstrap:
            sample = rng.integers(0, d.n, size=d.n)
        else:
            sample = np.arange(d.n)
        trees.append(fit_tree(d.X, d.y, mtry, params.min_node_size,
                              int_seed(params.seed, "forest", b, 1), sample))
    return Forest(trees, replace(params, mtry=mtry), list(d.columns), d.target)


def predict_forest(f: Forest, x) -> float | np.ndarray:
    """Average over trees of the leaf mean reached by ``x``.

    A single row gives a float; a matrix gives one prediction per row.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        return float(f.predict(x[None, :])[0])
    return f.predict(x)


def default_mtry_candidates(p: int) -> list[int]:
    return sorted({math.ceil(p / 3), math.ceil(p / 2), p})


def oob_mse(f: Forest, d: Dataset) -> float:
    pred, cnt = f.oob_predictions(d.X)
    ok = cnt > 0
    if not ok.any():
        raise ValueError("no observation is out of bag for any tree")
    return float(np.mean((pred[ok] - d.y[ok]) ** 2))


def _tune(d: Dataset, candidates: Sequence[int], params: ForestParams) -> tuple[int, Forest]:
    cands = sorted({int(c) for c in candidates if 1 <= int(c) <= d.p})
    if not cands:
        raise ValueError(f"no mtry candidate lies in [1, {d.p}]")
    best = None
    for m in cands:
        f = fit_forest(d, replace(params, mtry=m))
        if len(cands) == 1:
            return m, f
        err = oob_mse(f, d)
        if best is None or err < best[0]:
            best = (err, m, f)
    return best[1], best[2]


def tune_mtry(d: Dataset, candidates: Sequence[int] | None = None,
              params: ForestParams = ForestParams()) -> int:
    """Candidate with the smallest out-of-bag mean squared error; ties go to
    the smaller value. Candidates outside ``[1, p]`` are ignored."""
    if candidates is None:
        candidates = default_mtry_candidates(d.p)
    return _tune(d, candidates, params)[0]


def oob_sweep(d: Dataset, candidates: Sequence[int], params: ForestParams) -> dict[int, float]:
    return {m: oob_mse(fit_forest(d, replace(params, mtry=m)), d) for m in candidates}
