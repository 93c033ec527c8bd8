"""Compiled kernels for growing and routing regression trees.

Node arrays use ``feature == -1`` for leaves. A sample goes left iff
``x[feature] < threshold``. Children always get larger ids than their parent,
so a single pass in id order visits parents before children.
"""

import numpy as np
from numba import njit


@njit(cache=True)
def grow_tree(X, y, sample, mtry, min_node_size, seed):
    """Grow one CART regression tree on the rows listed in ``sample``.

    ``sample`` may contain repeats (bootstrap). Returns node arrays plus the
    per-node count and mean of the (bootstrap) targets used for fitting.
    """
    np.random.seed(seed)
    m_total = sample.shape[0]
    p = X.shape[1]
    cap = 2 * m_total + 1
    feature = np.full(cap, -1, np.int64)
    threshold = np.zeros(cap)
    left = np.full(cap, -1, np.int64)
    right = np.full(cap, -1, np.int64)
    parent = np.full(cap, -1, np.int64)
    fit_n = np.zeros(cap, np.int64)
    fit_mean = np.zeros(cap)
    start = np.zeros(cap, np.int64)
    stop = np.zeros(cap, np.int64)

    idx = sample.copy()
    buf = np.empty(m_total, np.int64)
    feats = np.arange(p)
    stack = np.empty(cap, np.int64)
    sp = 0
    stop[0] = m_total
    stack[sp] = 0
    sp += 1
    count = 1
    vals = np.empty(m_total)
    ys = np.empty(m_total)

    while sp > 0:
        sp -= 1
        node = stack[sp]
        s = start[node]
        e = stop[node]
        m = e - s
        tot = 0.0
        tot2 = 0.0
        for i in range(s, e):
            v = y[idx[i]]
            tot += v
            tot2 += v * v
        fit_n[node] = m
        fit_mean[node] = tot / m
        if m < 2 * min_node_size:
            continue
        for i in range(mtry):
            j = np.random.randint(i, p)
            t = feats[i]
            feats[i] = feats[j]
            feats[j] = t
        base = tot * tot / m
        tol = 1e-12 * max(tot2, 1e-300)
        best_gain = tol
        best_f = -1
        best_thr = 0.0
        for fi in range(mtry):
            f = feats[fi]
            for i in range(m):
                vals[i] = X[idx[s + i], f]
            order = np.argsort(vals[:m], kind="mergesort")
            if vals[order[0]] == vals[order[m - 1]]:
                continue
            for i in range(m):
                ys[i] = y[idx[s + order[i]]]
            sl = 0.0
            for i in range(min_node_size - 1):
                sl += ys[i]
            for i in range(min_node_size - 1, m - min_node_size):
                sl += ys[i]
                a = vals[order[i]]
                b = vals[order[i + 1]]
                if a == b:
                    continue
                nl = i + 1
                sr = tot - sl
                gain = sl * sl / nl + sr * sr / (m - nl) - base
                if gain > best_gain:
                    best_gain = gain
                    best_f = f
                    thr = 0.5 * (a + b)
                    if not (thr > a):
                        thr = b
                    best_thr = thr
        if best_f < 0:
            continue
        nl = 0
        nr = 0
        for i in range(s, e):
            r = idx[i]
            if X[r, best_f] < best_thr:
                idx[s + nl] = r
                nl += 1
            else:
                buf[nr] = r
                nr += 1
        for i in range(nr):
            idx[s + nl + i] = buf[i]
        lc = count
        rc = count + 1
        count += 2
        feature[node] = best_f
        threshold[node] = best_thr
        left[node] = lc
        right[node] = rc
        parent[lc] = node
        parent[rc] = node
        start[lc] = s
        stop[lc] = s + nl
        start[rc] = s + nl
        stop[rc] = e
        # right pushed first so the left subtree is expanded first
        stack[sp] = rc
        sp += 1
        stack[sp] = lc
        sp += 1

    return (
        feature[:count].copy(),
        threshold[:count].copy(),
        left[:count].copy(),
        right[:count].copy(),
        parent[:count].copy(),
        fit_n[:count].copy(),
        fit_mean[:count].copy(),
    )


@njit(cache=True)
def node_membership(X, y, feature, threshold, left, right, parent):
    """Route every row of ``X`` down the tree.

    Returns ``order, start, stop`` such that the rows reaching node ``j`` are
    ``order[start[j]:stop[j]]``, together with per-node counts and means of
    ``y``. An empty node inherits its parent's mean.
    """
    n = X.shape[0]
    k = feature.shape[0]
    order = np.arange(n)
    buf = np.empty(n, np.int64)
    start = np.zeros(k, np.int64)
    stop = np.zeros(k, np.int64)
    count = np.zeros(k, np.int64)
    mean = np.zeros(k)
    stop[0] = n
    for j in range(k):
        s = start[j]
        e = stop[j]
        count[j] = e - s
        if e > s:
            tot = 0.0
            for i in range(s, e):
                tot += y[order[i]]
            mean[j] = tot / (e - s)
        elif j > 0:
            mean[j] = mean[parent[j]]
        f = feature[j]
        if f < 0:
            continue
        thr = threshold[j]
        nl = 0
        nr = 0
        for i in range(s, e):
            r = order[i]
            if X[r, f] < thr:
                order[s + nl] = r
                nl += 1
            else:
                buf[nr] = r
                nr += 1
        for i in range(nr):
            order[s + nl + i] = buf[i]
        start[left[j]] = s
        stop[left[j]] = s + nl
        start[right[j]] = s + nl
        stop[right[j]] = e
    return order, start, stop, count, mean


@njit(cache=True)
def apply_tree(X, feature, threshold, left, right):
    """Leaf id reached by each row."""
    n = X.shape[0]
    out = np.empty(n, np.int64)
    for i in range(n):
        j = 0
        while feature[j] >= 0:
            if X[i, feature[j]] < threshold[j]:
                j = left[j]
            else:
                j = right[j]
        out[i] = j
    return out


@njit(cache=True)
def accumulate_tree(X, feature, threshold, left, right, value, out):
    for i in range(X.shape[0]):
        j = 0
        while feature[j] >= 0:
            if X[i, feature[j]] < threshold[j]:
                j = left[j]
            else:
                j = right[j]
        out[i] += value[j]
