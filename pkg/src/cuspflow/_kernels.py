"""Compiled inner loops for the synthetic maps.

Kind codes: 0 doubling, 1 cat map, 2 intermittent.  The doubling map keeps
53 revealed binary digits; every step shifts one out and appends the next
digit from the tail bit stream, so it is exact on the 53-bit grid.
"""

import numpy as np
from numba import njit

DOUBLING, CATMAP, INTERMITTENT = 0, 1, 2
ULP53 = 2.0 ** -53


@njit(cache=True)
def _tail_bit(words, pos):
    return np.float64((words[pos >> 6] >> np.uint64(pos & 63)) & np.uint64(1))


@njit(cache=True)
def _step(kind, x, y, alpha, words, pos):
    if kind == DOUBLING:
        x = 2.0 * x
        if x >= 1.0:
            x -= 1.0
        x += _tail_bit(words, pos) * ULP53
    elif kind == CATMAP:
        u = 2.0 * x + y
        v = x + y
        x = u - np.floor(u)
        y = v - np.floor(v)
    else:
        if x < 0.5:
            x = x * (1.0 + (2.0 * x) ** alpha)
        else:
            x = 2.0 * x - 1.0
    return x, y


@njit(cache=True)
def orbit(kind, x, y, alpha, words, bit0, n):
    """Base points ``x_0 .. x_{n-1}`` (second column only used by the cat map)."""
    out = np.empty((n, 2))
    for j in range(n):
        out[j, 0] = x
        out[j, 1] = y
        x, y = _step(kind, x, y, alpha, words, bit0 + j)
    return out


@njit(cache=True)
def advance(kind, x, y, alpha, words, bit0, n):
    for j in range(n):
        x, y = _step(kind, x, y, alpha, words, bit0 + j)
    return x, y


@njit(cache=True)
def advance_ensemble(kind, X, alpha, steps, words):
    """Advance sample ``i`` of ``X`` by ``steps[i]``; ``words[i]`` feeds its digits."""
    out = X.copy()
    for i in range(X.shape[0]):
        x = X[i, 0]
        y = X[i, 1]
        for j in range(steps[i]):
            x, y = _step(kind, x, y, alpha, words[i], j)
        out[i, 0] = x
        out[i, 1] = y
    return out


@njit(cache=True)
def _trapezoid(x, inv_r):
    w = 0.25 * inv_r
    if x < w:
        return x / w
    if x < 3.0 * w:
        return 1.0
    if x < 4.0 * w:
        return (4.0 * w - x) / w
    return 0.0


@njit(cache=True)
def sandwich_integrals(kind, x, y, alpha, words, s0, inv_r, constant, cp_time, cp_block):
    """Suspension integrals ``int_0^T f_{R_k}`` at every checkpoint.

    Base point ``x_j`` is occupied on ``[j - s0, j + 1 - s0)``.  Bump ``k``
    is the trapezoid supported on ``[0, inv_r[k]]``; ``inv_r`` must be
    non-increasing so that the supports are nested.  Checkpoints are sorted
    by time and each names the bump it integrates; ``block_end[k]`` is the
    last checkpoint time of bump ``k``.
    """
    nb = inv_r.size
    block_end = np.zeros(nb)
    for i in range(cp_time.size):
        if cp_time[i] > block_end[cp_block[i]]:
            block_end[cp_block[i]] = cp_time[i]
    k_lo = 0
    running = np.zeros(nb)
    vals = np.zeros(nb)
    out = np.empty(cp_time.size)
    ptr = 0
    j = 0
    t_end = cp_time[cp_time.size - 1]
    while ptr < cp_time.size:
        lo = j - s0
        if lo < 0.0:
            lo = 0.0
        hi = j + 1.0 - s0
        while k_lo < nb and block_end[k_lo] < lo:
            k_lo += 1
        n_hot = k_lo
        if constant:
            for k in range(k_lo, nb):
                vals[k] = 1.0
            n_hot = nb
        else:
            for k in range(k_lo, nb):
                if x >= inv_r[k]:
                    break
                vals[k] = _trapezoid(x, inv_r[k])
                n_hot = k + 1
        while ptr < cp_time.size and cp_time[ptr] < hi:
            k = cp_block[ptr]
            partial = 0.0
            if k_lo <= k < n_hot:
                partial = vals[k] * (cp_time[ptr] - lo)
            out[ptr] = running[k] + partial
            ptr += 1
        for k in range(k_lo, n_hot):
            running[k] += vals[k] * (hi - lo)
        if hi > t_end:
            break
        x, y = _step(kind, x, y, alpha, words, j)
        j += 1
    return out
