"""Exact rule decomposition of a fitted forest and grouping of rules by
interaction pattern.

Every node ``j`` of every tree gives one rule: the indicator of the node's
box, weighted by the change in mean response from the parent to the node
(the root carries the overall mean). Summed along any root-to-leaf path the
weights telescope to the leaf mean, so the weighted rules reproduce the
forest exactly. Rules whose box bounds some variable on both sides are split
into one-sided pieces; the sign pattern of a one-sided rule says in which
direction it moves the fit along each variable it touches, and rules with
the same pattern are summed into one group function.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Sequence

import numpy as np
from scipy import sparse

from . import _rules
from .forest import Forest


class RuleError(ValueError):
    pass


@dataclass(frozen=True)
class Box:
    """Axis-aligned box: ``x[k] >= lower[k]`` and ``x[k] < upper[k]``."""

    lower: dict[int, float] = field(default_factory=dict)
    upper: dict[int, float] = field(default_factory=dict)

    @property
    def is_canonical(self) -> bool:
        return not (self.lower.keys() & self.upper.keys())

    @property
    def variables(self) -> set[int]:
        return set(self.lower) | set(self.upper)

    def contains(self, X) -> np.ndarray | bool:
        X = np.asarray(X, dtype=np.float64)
        single = X.ndim == 1
        X = np.atleast_2d(X)
        inside = np.ones(X.shape[0], dtype=bool)
        for k, t in self.lower.items():
            inside &= X[:, k] >= t
        for k, t in self.upper.items():
            inside &= X[:, k] < t
        return bool(inside[0]) if single else inside

    def conditions(self) -> list[tuple[int, bool, float]]:
        """``(variable, is_lower, threshold)`` sorted by variable, lower first."""
        conds = [(k, True, t) for k, t in self.lower.items()]
        conds += [(k, False, t) for k, t in self.upper.items()]
        return sorted(conds, key=lambda c: (c[0], not c[1]))


@dataclass(frozen=True)
class WeightedRule:
    box: Box
    beta: float
    origin: tuple[int, int] | None = None
    piece: int = -1  # >= 0 for pieces produced by interval decomposition

    @property
    def synthetic(self) -> bool:
        return self.piece >= 0

    def __call__(self, X):
        inside = self.box.contains(X)
        if isinstance(inside, bool):
            return self.beta if inside else 0.0
        return self.beta * inside


@dataclass(frozen=True)
class InteractionPattern:
    signs: tuple[int, ...]

    @property
    def degree(self) -> int:
        return sum(1 for s in self.signs if s)

    @property
    def is_intercept(self) -> bool:
        return self.degree == 0

    @property
    def variables(self) -> tuple[int, ...]:
        return tuple(k for k, s in enumerate(self.signs) if s)

    def sort_key(self):
        return (self.degree, self.signs)

    def __str__(self) -> str:
        return "(" + ",".join({1: "+", -1: "-", 0: "0"}[s] for s in self.signs) + ")"

    @classmethod
    def parse(cls, text: str) -> "InteractionPattern":
        sym = {"+": 1, "-": -1, "0": 0}
        return cls(tuple(sym[t.strip()] for t in text.strip("() ").split(",")))


@dataclass
class RuleSet:
    """Column-oriented collection of weighted rules over ``p`` variables.

    Indexing yields :class:`WeightedRule` objects; everything bulk (pattern
    computation, evaluation, grouping) works on the arrays directly.
    """

    p: int
    beta: np.ndarray
    ptr: np.ndarray
    var: np.ndarray
    lower: np.ndarray
    thr: np.ndarray
    tree: np.ndarray
    node: np.ndarray
    piece: np.ndarray

    def __len__(self) -> int:
        return self.beta.shape[0]

    def __getitem__(self, i: int) -> WeightedRule:
        s, e = self.ptr[i], self.ptr[i + 1]
        lo, up = {}, {}
        for k, is_lo, t in zip(self.var[s:e], self.lower[s:e], self.thr[s:e]):
            if is_lo:
                lo[int(k)] = float(t)
            else:
                up[int(k)] = float(t)
        origin = None if self.tree[i] < 0 else (int(self.tree[i]), int(self.node[i]))
        return WeightedRule(Box(lo, up), float(self.beta[i]), origin, int(self.piece[i]))

    def __iter__(self) -> Iterator[WeightedRule]:
        return (self[i] for i in range(len(self)))

    @property
    def n_conditions(self) -> np.ndarray:
        return np.diff(self.ptr)

    @property
    def is_canonical(self) -> bool:
        if self.var.size < 2:
            return True
        inner = np.ones(self.var.size - 1, dtype=bool)
        starts = self.ptr[1:-1]
        inner[starts[(starts > 0) & (starts < self.var.size)] - 1] = False
        return not np.any((self.var[1:] == self.var[:-1]) & inner)

    @classmethod
    def empty(cls, p: int) -> "RuleSet":
        z = np.zeros(0, dtype=np.int64)
        return cls(p, np.zeros(0), np.zeros(1, dtype=np.int64), z, np.zeros(0, dtype=bool),
                   np.zeros(0), z, z, z)

    @classmethod
    def from_rules(cls, rules: Iterable[WeightedRule], p: int) -> "RuleSet":
        rules = list(rules)
        ptr = [0]
        var, lower, thr = [], [], []
        for r in rules:
            for k, is_lo, t in r.box.conditions():
                if not 0 <= k < p:
                    raise RuleError(f"variable index {k} out of range for p={p}")
                var.append(k)
                lower.append(is_lo)
                thr.append(t)
            ptr.append(len(var))
        return cls(
            p,
            np.array([r.beta for r in rules], dtype=np.float64),
            np.array(ptr, dtype=np.int64),
            np.array(var, dtype=np.int64),
            np.array(lower, dtype=bool),
            np.array(thr, dtype=np.float64),
            np.array([r.origin[0] if r.origin else -1 for r in rules], dtype=np.int64),
            np.array([r.origin[1] if r.origin else -1 for r in rules], dtype=np.int64),
            np.array([r.piece for r in rules], dtype=np.int64),
        )

    def take(self, idx) -> "RuleSet":
        idx = np.asarray(idx, dtype=np.int64)
        lens = self.ptr[idx + 1] - self.ptr[idx]
        ptr = np.zeros(idx.size + 1, dtype=np.int64)
        np.cumsum(lens, out=ptr[1:])
        # gather condition positions rule by rule
        pos = np.repeat(self.ptr[idx] - ptr[:-1], lens) + np.arange(ptr[-1])
        return RuleSet(self.p, self.beta[idx], ptr, self.var[pos], self.lower[pos], self.thr[pos],
                       self.tree[idx], self.node[idx], self.piece[idx])

    @classmethod
    def concat(cls, parts: Sequence["RuleSet"], p: int | None = None) -> "RuleSet":
        parts = list(parts)
        if not parts:
            if p is None:
                raise RuleError("cannot concatenate zero rule sets without p")
            return cls.empty(p)
        offs = np.cumsum([0] + [q.var.size for q in parts[:-1]])
        ptr = np.concatenate([[0]] + [q.ptr[1:] + o for q, o in zip(parts, offs)])
        cat = lambda name: np.concatenate([getattr(q, name) for q in parts])
        return cls(parts[0].p, cat("beta"), ptr.astype(np.int64), cat("var"), cat("lower"), cat("thr"),
                   cat("tree"), cat("node"), cat("piece"))

    def signs(self) -> np.ndarray:
        """Interaction pattern of every rule as an ``(R, p)`` int8 matrix."""
        if not self.is_canonical:
            raise RuleError("patterns are defined for one-sided (canonical) rules only")
        return _rules.signs(self.beta, self.ptr, self.var, self.lower, self.p)

    def evaluate(self, X, col: np.ndarray | None = None, ncols: int | None = None) -> np.ndarray:
        """Sum of ``beta * rule(x)`` per output column.

        Without ``col`` all rules go to one column and a vector is returned;
        otherwise the result has shape ``(n, ncols)``.
        """
        X = np.asarray(X, dtype=np.float64)
        if X.ndim == 1:
            X = X[None, :]
        if X.shape[1] != self.p:
            raise ValueError(f"expected rows with {self.p} entries, got {X.shape[1]}")
        if col is None:
            col, ncols = np.zeros(len(self), dtype=np.int64), 1
            return _evaluate(self, X, col, 1)[:, 0]
        return _evaluate(self, X, np.asarray(col, dtype=np.int64), int(ncols))

    def indicators(self, X) -> np.ndarray:
        """Dense ``(n, R)`` 0/1 matrix of rule memberships."""
        ones = RuleSet(self.p, np.ones(len(self)), self.ptr, self.var, self.lower, self.thr,
                       self.tree, self.node, self.piece)
        return ones.evaluate(X, np.arange(len(self)), len(self))

    def to_json(self) -> list[dict]:
        out = []
        for i in range(len(self)):
            s, e = self.ptr[i], self.ptr[i + 1]
            out.append({
                "vars": [[int(k), "ge" if lo else "lt", float(t)]
                         for k, lo, t in zip(self.var[s:e], self.lower[s:e], self.thr[s:e])],
                "beta": float(self.beta[i]),
                "origin": [int(self.tree[i]), int(self.node[i]), int(self.piece[i])],
            })
        return out

    @classmethod
    def from_json(cls, items: list[dict], p: int) -> "RuleSet":
        rules = []
        for d in items:
            lo, up = {}, {}
            for k, side, t in d["vars"]:
                (lo if side == "ge" else up)[int(k)] = float(t)
            tree, node, piece = d.get("origin", [-1, -1, -1])
            origin = None if tree < 0 else (tree, node)
            rules.append(WeightedRule(Box(lo, up), float(d["beta"]), origin, piece))
        return cls.from_rules(rules, p)


_ROW_BLOCK = 8192


def _condition_ids(rs: RuleSet):
    """Map every condition to a bitset id: one sorted threshold list per
    variable, ids running consecutively over variables."""
    cid = np.empty(rs.var.size, dtype=np.int64)
    per_var = []
    offset = 0
    for k in range(rs.p):
        sel = np.flatnonzero(rs.var == k)
        if sel.size == 0:
            per_var.append(None)
            continue
        T, inv = np.unique(rs.thr[sel], return_inverse=True)
        cid[sel] = offset + inv.ravel()
        per_var.append((offset, T))
        offset += T.size
    return cid, per_var, offset


def _block_bits(per_var, n_ids: int, Xb: np.ndarray) -> np.ndarray:
    n_words = (Xb.shape[0] + 63) // 64
    bits = np.empty((n_ids, n_words), dtype=np.uint64)
    for k, entry in enumerate(per_var):
        if entry is None:
            continue
        off, T = entry
        rank = np.searchsorted(T, Xb[:, k], side="right").astype(np.int64)
        bits[off:off + T.size] = _rules.threshold_bits(rank, T.size, n_words)
    return bits


def _evaluate(rs: RuleSet, X: np.ndarray, col: np.ndarray, ncols: int) -> np.ndarray:
    n = X.shape[0]
    out = np.empty((n, ncols))
    if len(rs) == 0 or n == 0:
        out[:] = 0.0
        return out
    cid, per_var, n_ids = _condition_ids(rs)
    for s in range(0, n, _ROW_BLOCK):
        Xb = X[s:s + _ROW_BLOCK]
        nb = Xb.shape[0]
        bits = _block_bits(per_var, n_ids, Xb)
        out[s:s + nb] = _rules.accumulate_bits(bits, rs.beta, rs.ptr, cid, rs.lower, col, ncols, nb).T
    return out


def sparse_indicators(rs: RuleSet, X) -> sparse.csc_matrix:
    """``(n, R)`` sparse 0/1 matrix of rule memberships."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != rs.p:
        raise ValueError(f"expected rows with {rs.p} entries, got shape {X.shape}")
    n = X.shape[0]
    if len(rs) == 0 or n == 0:
        return sparse.csc_matrix((n, len(rs)))
    cid, per_var, n_ids = _condition_ids(rs)
    blocks = []
    for s in range(0, n, _ROW_BLOCK):
        Xb = X[s:s + _ROW_BLOCK]
        bits = _block_bits(per_var, n_ids, Xb)
        indptr, indices = _rules.indicator_csc(bits, rs.ptr, cid, rs.lower, Xb.shape[0])
        blocks.append(sparse.csc_matrix((np.ones(indices.size), indices, indptr), shape=(Xb.shape[0], len(rs))))
    return blocks[0] if len(blocks) == 1 else sparse.vstack(blocks, format="csc")


@dataclass
class ExtractionReport:
    n_nodes: int = 0
    n_empty: int = 0
    n_zero_beta: int = 0


def extract_rules(f: Forest, report: ExtractionReport | None = None) -> RuleSet:
    """One weighted rule per non-empty tree node.

    Root rules have an empty box and weight ``mean(y) / T``; any other node
    gets ``(mean(node) - mean(parent)) / T``, means taken over the original
    training rows and ``T`` the number of trees. Nodes reached by no
    training row, and nodes whose weight is exactly zero, are dropped (and
    counted in ``report``). Boxes may still bound a variable on both sides;
    see :func:`decompose_rules`.
    """
    parts = []
    T = f.num_trees
    rep = report if report is not None else ExtractionReport()
    for b, t in enumerate(f.trees):
        beta = t.node_mean.copy()
        beta[1:] -= t.node_mean[t.parent[1:]]
        beta /= T
        empty = t.n_node == 0
        keep = ~empty & (beta != 0.0)
        rep.n_nodes += t.size
        rep.n_empty += int(empty.sum())
        rep.n_zero_beta += int(((beta == 0.0) & ~empty).sum())
        lo, hi = _rules.tree_boxes(t.feature, t.threshold, t.left, t.right, t.parent, f.p)
        ptr, var, lower, thr = _rules.boxes_to_csr(lo, hi, keep)
        nodes = np.flatnonzero(keep)
        parts.append(RuleSet(f.p, beta[nodes], ptr, var, lower, thr,
                             np.full(nodes.size, b, dtype=np.int64), nodes,
                             np.full(nodes.size, -1, dtype=np.int64)))
    if rep.n_empty:
        warnings.warn(f"{rep.n_empty} tree nodes hold no training rows; their rules were dropped",
                      stacklevel=2)
    return RuleSet.concat(parts, f.p)


def decompose_intervals(r: WeightedRule) -> list[WeightedRule]:
    """Rewrite a rule as one-sided rules with the same pointwise sum.

    Each variable bounded as ``a <= x < b`` is replaced using
    ``beta*1{a<=x<b, C} = beta*1{x>=a, C} - beta*1{x>=b, C}``, one variable
    at a time in increasing index order.
    """
    two_sided = sorted(r.box.lower.keys() & r.box.upper.keys())
    if not two_sided:
        return [r]
    out = [(dict(r.box.lower), dict(r.box.upper), r.beta, 0)]
    for k in two_sided:
        nxt = []
        for lo, up, beta, mask in out:
            b = up.pop(k)
            lo_a = dict(lo)
            lo_b = dict(lo)
            lo_b[k] = b
            nxt.append((lo_a, dict(up), beta, mask << 1))
            nxt.append((lo_b, dict(up), -beta, (mask << 1) | 1))
        out = nxt
    return [WeightedRule(Box(lo, up), beta, r.origin, mask) for lo, up, beta, mask in out]


def decompose_rules(rules: RuleSet) -> RuleSet:
    """Bulk :func:`decompose_intervals` over a rule set (same output order)."""
    beta, src, piece, ptr, var, lower, thr = _rules.decompose(
        rules.beta, rules.ptr, rules.var, rules.lower, rules.thr)
    return RuleSet(rules.p, beta, ptr, var, lower, thr, rules.tree[src], rules.node[src], piece)


def canonical_rules(f: Forest, report: ExtractionReport | None = None) -> RuleSet:
    return decompose_rules(extract_rules(f, report))


def pattern_of(r: WeightedRule, p: int | None = None) -> InteractionPattern:
    """Direction in which the rule moves the fit along each variable.

    ``+1`` where the weighted indicator is non-decreasing in ``x[k]`` and
    not constant, ``-1`` where it is non-increasing and not constant, ``0``
    where ``k`` is unconstrained. For a one-sided box that is
    ``sign(beta)`` for a lower bound and ``-sign(beta)`` for an upper bound.
    """
    if not r.box.is_canonical:
        raise RuleError("pattern_of needs a rule with at most one bound per variable")
    if r.beta == 0:
        raise RuleError("pattern_of needs a non-zero coefficient")
    if p is None:
        p = max(r.box.variables, default=-1) + 1
    signs = [0] * p
    sb = 1 if r.beta > 0 else -1
    for k in r.box.lower:
        signs[k] = sb
    for k in r.box.upper:
        signs[k] = -sb
    return InteractionPattern(tuple(signs))


@dataclass
class GroupFit:
    pattern: InteractionPattern
    rules: RuleSet
    rule_ids: np.ndarray | None = field(default=None, repr=False)

    @property
    def degree(self) -> int:
        return self.pattern.degree

    def __call__(self, X):
        return eval_group(self, X)

    def l1_mass(self) -> float:
        return float(np.abs(self.rules.beta).sum())


def _as_ruleset(rules, p: int | None) -> RuleSet:
    if isinstance(rules, RuleSet):
        return rules
    rules = list(rules)
    if p is None:
        p = max((max(r.box.variables, default=-1) for r in rules), default=-1) + 1
    return RuleSet.from_rules(rules, p)


def group_rules(rules: RuleSet | Sequence[WeightedRule], p: int | None = None) -> list[GroupFit]:
    """Partition one-sided rules by interaction pattern.

    Zero-weight rules are dropped first, so every returned group is active.
    Groups come sorted by degree, then lexicographically by signs
    (``-1 < 0 < +1``); the all-zero (intercept) pattern, if present, is
    therefore first.
    """
    rs = _as_ruleset(rules, p)
    if len(rs) == 0:
        return []
    nonzero = np.flatnonzero(rs.beta != 0.0)
    rs = rs.take(nonzero)
    if len(rs) == 0:
        return []
    S = rs.signs()
    key = np.ascontiguousarray((S + 1).astype(np.uint8)).view(np.dtype((np.void, rs.p)))[:, 0]
    uniq, inverse = np.unique(key, return_inverse=True)
    inverse = inverse.ravel()
    U = np.frombuffer(uniq.tobytes(), dtype=np.uint8).reshape(-1, rs.p).astype(np.int8) - 1
    degree = (U != 0).sum(axis=1)
    # np.unique already sorted lexicographically by (signs + 1); make degree primary
    order = np.argsort(degree, kind="stable")
    rank = np.empty_like(order)
    rank[order] = np.arange(order.size)
    gid = rank[inverse]
    by_group = np.argsort(gid, kind="stable")
    bounds = np.searchsorted(gid[by_group], np.arange(order.size + 1))
    groups = []
    for g in range(order.size):
        idx = by_group[bounds[g]:bounds[g + 1]]
        groups.append(GroupFit(InteractionPattern(tuple(int(v) for v in U[order[g]])), rs.take(idx),
                               nonzero[idx]))
    return groups


def eval_group(g: GroupFit, x):
    """``sum(beta_j * R_j(x))`` over the group's rules, for a row or matrix."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        if x.shape[0] != g.rules.p:
            raise ValueError(f"expected {g.rules.p} entries, got {x.shape[0]}")
        return float(g.rules.evaluate(x[None, :])[0])
    return g.rules.evaluate(x)


def evaluate_groups(groups: Sequence[GroupFit], X) -> np.ndarray:
    """``(n, G)`` matrix of every group function at every row."""
    X = np.asarray(X, dtype=np.float64)
    if not groups:
        return np.zeros((X.shape[0], 0))
    rs = RuleSet.concat([g.rules for g in groups])
    col = np.repeat(np.arange(len(groups)), [len(g.rules) for g in groups])
    return rs.evaluate(X, col, len(groups))


def groups_to_json(groups: Sequence[GroupFit]) -> list[dict]:
    return [{"signs": list(g.pattern.signs), "rule_ids": [int(i) for i in g.rule_ids]} for g in groups]


def groups_from_json(items: list[dict], rules: RuleSet) -> list[GroupFit]:
    out = []
    for d in items:
        ids = np.asarray(d["rule_ids"], dtype=np.int64)
        out.append(GroupFit(InteractionPattern(tuple(d["signs"])), rules.take(ids), ids))
    return out
