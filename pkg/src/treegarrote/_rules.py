"""Compiled kernels for rule extraction, interval decomposition and rule
evaluation.

Rules are stored in CSR form: conditions of rule ``r`` are
``ptr[r]:ptr[r+1]`` in ``var``/``lower``/``thr``, sorted by variable, with a
lower bound (``x >= t``) listed before an upper bound (``x < t``) of the same
variable.
"""

import numpy as np
from numba import njit


@njit(cache=True)
def tree_boxes(feature, threshold, left, right, parent, p):
    """Per-node box of a tree: ``lo[j, k] <= x[k] < hi[j, k]``, with repeated
    same-side conditions collapsed to the tightest bound."""
    k = feature.shape[0]
    lo = np.full((k, p), -np.inf)
    hi = np.full((k, p), np.inf)
    for j in range(k):
        f = feature[j]
        if f < 0:
            continue
        t = threshold[j]
        lc = left[j]
        rc = right[j]
        for v in range(p):
            lo[lc, v] = lo[j, v]
            hi[lc, v] = hi[j, v]
            lo[rc, v] = lo[j, v]
            hi[rc, v] = hi[j, v]
        if t < hi[lc, f]:
            hi[lc, f] = t
        if t > lo[rc, f]:
            lo[rc, f] = t
    return lo, hi


@njit(cache=True)
def boxes_to_csr(lo, hi, keep):
    """CSR conditions for the rows of ``lo``/``hi`` selected by ``keep``."""
    k, p = lo.shape
    nnz = 0
    nr = 0
    for j in range(k):
        if not keep[j]:
            continue
        nr += 1
        for v in range(p):
            if lo[j, v] > -np.inf:
                nnz += 1
            if hi[j, v] < np.inf:
                nnz += 1
    ptr = np.zeros(nr + 1, np.int64)
    var = np.empty(nnz, np.int64)
    lower = np.empty(nnz, np.bool_)
    thr = np.empty(nnz)
    r = 0
    c = 0
    for j in range(k):
        if not keep[j]:
            continue
        for v in range(p):
            if lo[j, v] > -np.inf:
                var[c] = v
                lower[c] = True
                thr[c] = lo[j, v]
                c += 1
            if hi[j, v] < np.inf:
                var[c] = v
                lower[c] = False
                thr[c] = hi[j, v]
                c += 1
        r += 1
        ptr[r] = c
    return ptr, var, lower, thr


@njit(cache=True)
def decompose(beta, ptr, var, lower, thr):
    """Expand each rule with ``m`` two-sided variables into ``2**m``
    one-sided rules.

    For ``a <= x < b``: ``1{a <= x < b} = 1{x >= a} - 1{x >= b}``. Piece
    ``mask`` takes ``b`` for the ``i``-th two-sided variable when bit
    ``m-1-i`` of ``mask`` is set and carries sign ``(-1)**popcount(mask)``.
    Returns the source rule index and mask of every piece (``-1`` for rules
    that had no two-sided variable).
    """
    nr = beta.shape[0]
    out_rules = 0
    out_nnz = 0
    for r in range(nr):
        s = ptr[r]
        e = ptr[r + 1]
        m = 0
        for c in range(s, e - 1):
            if var[c] == var[c + 1]:
                m += 1
        out_rules += 1 << m
        out_nnz += (e - s - m) << m
    nbeta = np.empty(out_rules)
    src = np.empty(out_rules, np.int64)
    piece = np.empty(out_rules, np.int64)
    nptr = np.zeros(out_rules + 1, np.int64)
    nvar = np.empty(out_nnz, np.int64)
    nlower = np.empty(out_nnz, np.bool_)
    nthr = np.empty(out_nnz)
    o = 0
    c_out = 0
    for r in range(nr):
        s = ptr[r]
        e = ptr[r + 1]
        m = 0
        for c in range(s, e - 1):
            if var[c] == var[c + 1]:
                m += 1
        for mask in range(1 << m):
            pair = 0
            sign = 1.0
            c = s
            while c < e:
                if c + 1 < e and var[c] == var[c + 1]:
                    bit = (mask >> (m - 1 - pair)) & 1
                    nvar[c_out] = var[c]
                    nlower[c_out] = True
                    if bit:
                        nthr[c_out] = thr[c + 1]
                        sign = -sign
                    else:
                        nthr[c_out] = thr[c]
                    c_out += 1
                    pair += 1
                    c += 2
                else:
                    nvar[c_out] = var[c]
                    nlower[c_out] = lower[c]
                    nthr[c_out] = thr[c]
                    c_out += 1
                    c += 1
            nbeta[o] = sign * beta[r]
            src[o] = r
            piece[o] = mask if m > 0 else -1
            o += 1
            nptr[o] = c_out
    return nbeta, src, piece, nptr, nvar, nlower, nthr


@njit(cache=True)
def accumulate(XT, beta, ptr, var, lower, thr, col, ncols):
    """``out[col[r], i] += beta[r] * 1{row i inside box r}``.

    ``XT`` is the transposed design (variables by rows).
    """
    n = XT.shape[1]
    out = np.zeros((ncols, n))
    for r in range(beta.shape[0]):
        s = ptr[r]
        e = ptr[r + 1]
        b = beta[r]
        g = col[r]
        for i in range(n):
            inside = True
            for c in range(s, e):
                v = XT[var[c], i]
                if lower[c]:
                    if v < thr[c]:
                        inside = False
                        break
                elif v >= thr[c]:
                    inside = False
                    break
            if inside:
                out[g, i] += b
    return out


@njit(cache=True)
def signs(beta, ptr, var, lower, p):
    nr = beta.shape[0]
    out = np.zeros((nr, p), np.int8)
    for r in range(nr):
        sb = 1 if beta[r] > 0 else -1
        for c in range(ptr[r], ptr[r + 1]):
            out[r, var[c]] = sb if lower[c] else -sb
    return out


@njit(cache=True)
def threshold_bits(rank, n_thr, n_words):
    """Row bitsets ``bits[i]`` = rows whose ``rank > i``, i.e. rows with
    ``x >= t_i`` when ``rank`` counts thresholds ``<= x``."""
    n = rank.shape[0]
    bits = np.zeros((n_thr, n_words), np.uint64)
    order = np.argsort(rank, kind="mergesort")
    cur = np.zeros(n_words, np.uint64)
    pos = n - 1
    one = np.uint64(1)
    for i in range(n_thr - 1, -1, -1):
        while pos >= 0 and rank[order[pos]] > i:
            row = order[pos]
            cur[row >> 6] |= one << np.uint64(row & 63)
            pos -= 1
        bits[i, :] = cur
    return bits


@njit(cache=True)
def accumulate_bits(bits, beta, ptr, cid, lower, col, ncols, n):
    """Same contract as :func:`accumulate`, with row membership computed by
    AND-ing precomputed threshold bitsets (complemented for upper bounds)."""
    n_words = bits.shape[1]
    out = np.zeros((ncols, n))
    acc = np.empty(n_words, np.uint64)
    full = ~np.uint64(0)
    tail = n - 64 * (n_words - 1)
    last = full if tail == 64 else (np.uint64(1) << np.uint64(tail)) - np.uint64(1)
    for r in range(beta.shape[0]):
        for w in range(n_words):
            acc[w] = full
        acc[n_words - 1] = last
        for c in range(ptr[r], ptr[r + 1]):
            b = cid[c]
            if lower[c]:
                for w in range(n_words):
                    acc[w] &= bits[b, w]
            else:
                for w in range(n_words):
                    acc[w] &= ~bits[b, w]
        g = col[r]
        v = beta[r]
        for w in range(n_words):
            word = acc[w]
            if word == 0:
                continue
            base = w * 64
            for byte in range(8):
                chunk = (word >> np.uint64(8 * byte)) & np.uint64(255)
                if chunk == 0:
                    continue
                for bit in range(8):
                    if (chunk >> np.uint64(bit)) & np.uint64(1):
                        out[g, base + 8 * byte + bit] += v
    return out


@njit(cache=True)
def _rule_word(bits, r, w, ptr, cid, lower, last, n_words):
    word = ~np.uint64(0) if w < n_words - 1 else last
    for c in range(ptr[r], ptr[r + 1]):
        if lower[c]:
            word &= bits[cid[c], w]
        else:
            word &= ~bits[cid[c], w]
    return word


@njit(cache=True)
def _popcount(x):
    c = 0
    while x:
        x &= x - np.uint64(1)
        c += 1
    return c


@njit(cache=True)
def indicator_csc(bits, ptr, cid, lower, n):
    """Rule memberships as CSC arrays ``(indptr, indices)``: column ``r``
    lists the rows inside box ``r`` in increasing order."""
    n_words = bits.shape[1]
    nr = ptr.shape[0] - 1
    tail = n - 64 * (n_words - 1)
    last = ~np.uint64(0) if tail == 64 else (np.uint64(1) << np.uint64(tail)) - np.uint64(1)
    indptr = np.zeros(nr + 1, np.int64)
    for r in range(nr):
        cnt = 0
        for w in range(n_words):
            cnt += _popcount(_rule_word(bits, r, w, ptr, cid, lower, last, n_words))
        indptr[r + 1] = indptr[r] + cnt
    indices = np.empty(indptr[nr], np.int32)
    for r in range(nr):
        o = indptr[r]
        for w in range(n_words):
            word = _rule_word(bits, r, w, ptr, cid, lower, last, n_words)
            base = w * 64
            b = 0
            while word:
                if word & np.uint64(1):
                    indices[o] = base + b
                    o += 1
                word >>= np.uint64(1)
                b += 1
    return indptr, indices
