"""Independent reference implementations used only by the tests."""

from __future__ import annotations

import itertools

import numpy as np
from numba import njit


@njit(cache=True)
def _project_capped(v, budget, out, work):
    """Euclidean projection of ``v`` onto ``{g >= 0, sum(g) <= budget}``."""
    G = v.shape[0]
    s = 0.0
    for i in range(G):
        out[i] = v[i] if v[i] > 0.0 else 0.0
        s += out[i]
    if s <= budget:
        return
    work[:] = v
    work.sort()
    css = 0.0
    theta = 0.0
    for i in range(G):
        u = work[G - 1 - i]
        css += u
        t = (css - budget) / (i + 1)
        if u - t > 0:
            theta = t
    for i in range(G):
        x = v[i] - theta
        out[i] = x if x > 0.0 else 0.0


@njit(cache=True)
def _objective(H, b, g):
    G = b.shape[0]
    f = 0.0
    for i in range(G):
        hi = 0.0
        for j in range(G):
            hi += H[i, j] * g[j]
        f += g[i] * hi - 2.0 * b[i] * g[i]
    return f


@njit(cache=True)
def projected_gradient(H, b, budget, iters):
    """Minimise ``g'Hg - 2b'g`` over the capped simplex by projected
    gradient from ``g = 0`` with step ``1/L``; a step is halved whenever it
    fails to decrease the objective."""
    G = b.shape[0]
    L = 0.0
    for i in range(G):
        s = 0.0
        for j in range(G):
            s += abs(H[i, j])
        L = max(L, s)
    step = 0.5 / max(L, 1e-300)
    g = np.zeros(G)
    v = np.empty(G)
    cand = np.empty(G)
    work = np.empty(G)
    f = 0.0
    for it in range(iters):
        for i in range(G):
            gi = 0.0
            for j in range(G):
                gi += H[i, j] * g[j]
            v[i] = g[i] - step * 2.0 * (gi - b[i])
        _project_capped(v, budget, cand, work)
        fc = _objective(H, b, cand)
        while fc > f + 1e-15 * abs(f) and step > 1e-300:
            step *= 0.5
            for i in range(G):
                gi = 0.0
                for j in range(G):
                    gi += H[i, j] * g[j]
                v[i] = g[i] - step * 2.0 * (gi - b[i])
            _project_capped(v, budget, cand, work)
            fc = _objective(H, b, cand)
        g[:] = cand
        f = fc
    return g


def garrote_oracle(Z: np.ndarray, r: np.ndarray, budget: float, iters: int = 1_000_000) -> tuple[np.ndarray, float]:
    """Oracle solution and its residual sum of squares."""
    H = Z.T @ Z
    b = Z.T @ r
    g = projected_gradient(H, b, float(budget), iters)
    e = r - Z @ g
    return g, float(e @ e)


def brute_force_pattern(lower: dict[int, float], upper: dict[int, float], beta: float, p: int) -> tuple[int, ...]:
    """Sign pattern found by searching sup/inf of ``beta * (R(x) - R(x'))``
    over probe points where ``x`` and ``x'`` differ only in coordinate ``k``
    with ``x[k] > x'[k]``."""
    thresholds = {k: [] for k in range(p)}
    for k, t in list(lower.items()) + list(upper.items()):
        thresholds[k].append(t)
    axes = []
    for k in range(p):
        vals = {0.0}
        for t in thresholds[k]:
            vals.update((t - 1.0, t, t + 1.0))
        axes.append(sorted(vals))

    def inside(x):
        return all(x[k] >= t for k, t in lower.items()) and all(x[k] < t for k, t in upper.items())

    out = []
    for k in range(p):
        sup, inf = 0.0, 0.0
        others = [axes[j] if j != k else [None] for j in range(p)]
        for base in itertools.product(*others):
            x = list(base)
            for hi, lo in itertools.combinations(sorted(axes[k], reverse=True), 2):
                x[k] = hi
                a = inside(x)
                x[k] = lo
                b = inside(x)
                delta = beta * (float(a) - float(b))
                sup = max(sup, delta)
                inf = min(inf, delta)
        out.append(1 if sup > 0 else (-1 if inf < 0 else 0))
    return tuple(out)


def box_indicator(x: np.ndarray, lower: dict[int, float], upper: dict[int, float]) -> np.ndarray:
    """Direct evaluation of ``1{lower <= x < upper}`` on the rows of ``x``."""
    x = np.atleast_2d(x)
    m = np.ones(x.shape[0], dtype=bool)
    for k, t in lower.items():
        m &= x[:, k] >= t
    for k, t in upper.items():
        m &= x[:, k] < t
    return m.astype(np.float64)


def corner_grid(lower: dict[int, float], upper: dict[int, float], p: int, eps: float = 1e-6) -> np.ndarray:
    """All points combining, per constrained variable, every bound and
    bound +/- ``eps``; unconstrained variables are fixed at 0."""
    axes = []
    for k in range(p):
        vals = set()
        for t in (lower.get(k), upper.get(k)):
            if t is not None:
                vals.update((t - eps, t, t + eps))
        axes.append(sorted(vals) if vals else [0.0])
    return np.array(list(itertools.product(*axes)), dtype=np.float64)
