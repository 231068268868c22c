"""Compiled inner loops for the window statistics and the index policies.

All kernels work on plain numpy buffers owned by the Python wrappers in
``windowstats``. Prefix buffers are Kahan-compensated: the sum of the first
``n`` samples is ``hi[n] - lo[n]``.
"""

import math

import numpy as np
from numba import njit


@njit(cache=True, nogil=True)
def window_sum(hi, lo, n, h):
    return (hi[n] - hi[n - h]) - (lo[n] - lo[n - h])


@njit(cache=True, nogil=True)
def raw_index(hi, lo, n, radius):
    """min over h in 1..n of mean_h + radius/sqrt(h); ties go to the larger h."""
    best = np.inf
    best_h = 0
    for h in range(1, n + 1):
        v = window_sum(hi, lo, n, h) / h + radius / math.sqrt(h)
        if v <= best:
            best = v
            best_h = h
    return best, best_h


@njit(cache=True, nogil=True)
def raw_select(hi, lo, counts, radius, isq):
    """Argmax over arms of the window-minimum index; ``isq[h] = 1/sqrt(h)``."""
    best = -np.inf
    pick = 0
    for i in range(counts.shape[0]):
        n = counts[i]
        th = hi[i, n]
        tl = lo[i, n]
        v = np.inf
        for h in range(1, n + 1):
            w = ((th - hi[i, n - h]) - (tl - lo[i, n - h])) / h + radius * isq[h]
            if w < v:
                v = w
        if v > best:
            best = v
            pick = i
    return pick


@njit(cache=True, nogil=True)
def fewa_select(hi, lo, counts, radius):
    """Expanding-window filter. ``hi``/``lo`` are (K, capacity) prefix buffers."""
    k = counts.shape[0]
    alive = np.ones(k, dtype=np.bool_)
    vals = np.empty(k)
    h = 1
    while True:
        mx = -np.inf
        for i in range(k):
            if alive[i]:
                vals[i] = window_sum(hi[i], lo[i], counts[i], h) / h
                if vals[i] > mx:
                    mx = vals[i]
        thr = mx - 2.0 * radius / math.sqrt(h)
        pick = -1
        for i in range(k):
            if alive[i]:
                if vals[i] < thr:
                    alive[i] = False
                elif pick < 0 and counts[i] == h:
                    pick = i
        if pick >= 0:
            return pick
        h += 1


@njit(cache=True, nogil=True)
def eff_update(H, mu, p, n, L, N, value, num, den, dense):
    """One EFF_UPDATE step for a single arm; returns the new level count.

    ``N`` is the pull count after this pull. The caller guarantees room for
    one more level. Undefined statistics are NaN.
    """
    if N == H[L - 1]:
        if dense:
            H[L] = N + 1
        else:
            H[L] = (num * N + den - 1) // den
        p[L] = p[L - 1]
        n[L] = n[L - 1]
        mu[L] = np.nan
        L += 1
    mu[0] = value
    p[0] = value
    n[0] = 1
    for j in range(1, L):
        p[j] += value
        n[j] += 1
    for j in range(L - 1, 0, -1):
        if n[j] == H[j]:
            mu[j] = p[j] / H[j]
            p[j] = p[j - 1]
            n[j] = n[j - 1]
    return L


@njit(cache=True, nogil=True)
def defined_levels(mu, L):
    d = 0
    while d < L and not math.isnan(mu[d]):
        d += 1
    return d


@njit(cache=True, nogil=True)
def eff_index(H, mu, L, radius):
    """Index over defined grid windows; ties go to the larger window."""
    best = np.inf
    best_h = 0
    for j in range(L):
        if math.isnan(mu[j]):
            continue
        v = mu[j] + radius / math.sqrt(H[j])
        if v <= best:
            best = v
            best_h = H[j]
    return best, best_h


@njit(cache=True, nogil=True)
def eff_fewa_select(H, mu, L, radius):
    """Filter over grid levels. ``H``/``mu`` are (K, capacity); ``L`` per arm."""
    k = L.shape[0]
    alive = np.ones(k, dtype=np.bool_)
    last = np.empty(k, dtype=np.int64)
    for i in range(k):
        last[i] = defined_levels(mu[i], L[i]) - 1
    vals = np.empty(k)
    j = 0
    while True:
        mx = -np.inf
        h = 0
        for i in range(k):
            if alive[i]:
                vals[i] = mu[i, j]
                h = H[i, j]
                if vals[i] > mx:
                    mx = vals[i]
        thr = mx - 2.0 * radius / math.sqrt(h)
        pick = -1
        for i in range(k):
            if alive[i]:
                if vals[i] < thr:
                    alive[i] = False
                elif pick < 0 and last[i] == j:
                    pick = i
        if pick >= 0:
            return pick
        j += 1


@njit(cache=True, nogil=True)
def max_normalized_deviation(noise_prefix, n):
    """max over windows h <= n of |sum of the last h noise terms| / sqrt(h)."""
    best = 0.0
    for h in range(1, n + 1):
        v = abs(noise_prefix[n] - noise_prefix[n - h]) / math.sqrt(h)
        if v > best:
            best = v
    return best


@njit(cache=True, nogil=True)
def block_deviation_exceeds(noise, radius):
    """True iff some contiguous block of ``noise`` has |sum| / sqrt(len) > radius."""
    n = noise.shape[0]
    for a in range(n):
        s = 0.0
        for b in range(a, n):
            s += noise[b]
            if abs(s) > radius * math.sqrt(b - a + 1):
                return True
    return False


@njit(cache=True, nogil=True)
def count_block_failures(noise, radius):
    """Rows (first axis) of a (R, K, n) noise array with an out-of-radius block on any arm."""
    fails = 0
    for r in range(noise.shape[0]):
        for i in range(noise.shape[1]):
            if block_deviation_exceeds(noise[r, i], radius):
                fails += 1
                break
    return fails


@njit(cache=True, nogil=True)
def eff_property_check(values, num, den, dense, cadence):
    """Replay ``values`` through EFF_UPDATE and count structural violations.

    Returns counts for: [block membership, update cadence (only when
    ``cadence``), pending sums, pending count bound, monotone counts, space].
    """
    N_tot = values.shape[0]
    cap = N_tot + 2
    H = np.ones(cap, dtype=np.int64)
    mu = np.full(cap, np.nan)
    p = np.zeros(cap)
    n = np.zeros(cap, dtype=np.int64)
    P = np.zeros(N_tot + 1)
    for k in range(N_tot):
        P[k + 1] = P[k] + values[k]
    out = np.zeros(6, dtype=np.int64)
    old_n = np.zeros(cap, dtype=np.int64)
    L = 1
    logm = math.log(num / den) if not dense else 0.0
    for N in range(1, N_tot + 1):
        for j in range(L):
            old_n[j] = n[j]
        old_n[L] = n[L - 1]
        L = eff_update(H, mu, p, n, L, N, values[N - 1], num, den, dense)
        for j in range(L):
            h = H[j]
            if not math.isnan(mu[j]):
                found = False
                for d in range(h):
                    if N - d - h < 0:
                        break
                    blk = (P[N - d] - P[N - d - h]) / h
                    if abs(blk - mu[j]) <= 1e-9 * (1.0 + abs(mu[j])):
                        found = True
                        break
                if not found:
                    out[0] += 1
            if cadence and j >= 1:
                # a refresh is the pending count reaching the window length
                changed = old_n[j] + 1 == h
                expected = N >= h and N % (h // 2) == 0
                if changed != expected:
                    out[1] += 1
            if n[j] > N or abs(p[j] - (P[N] - P[N - n[j]])) > 1e-9 * (1.0 + abs(p[j])):
                out[2] += 1
            if (j == 0 and n[j] > 1) or (j > 0 and n[j] >= h):
                out[3] += 1
            if j > 0 and n[j] < n[j - 1]:
                out[4] += 1
        if not dense and L > 2 + math.log(N) / logm + 1e-9:
            out[5] += 1
    return out
