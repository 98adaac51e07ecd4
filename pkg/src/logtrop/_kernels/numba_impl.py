"""numba-compiled versions of the hot loops; same contracts as numpy_impl."""

from __future__ import annotations

import math

import numpy as np
from numba import njit

_JIT = dict(cache=True, nogil=True)


@njit(**_JIT)
def _envelope_eval(slopes, intercepts, breakpoints, xs, vals, idx):
    for i in range(xs.shape[0]):
        x = xs[i]
        # searchsorted(side="left"): number of breakpoints strictly below x
        lo, hi = 0, breakpoints.shape[0]
        while lo < hi:
            mid = (lo + hi) // 2
            if breakpoints[mid] < x:
                lo = mid + 1
            else:
                hi = mid
        idx[i] = lo
        n = slopes[lo]
        if n == 0.0:
            vals[i] = intercepts[lo]
        else:
            vals[i] = intercepts[lo] + n * x


def envelope_eval(slopes, intercepts, breakpoints, xs):
    xs = np.ascontiguousarray(xs, dtype=np.float64)
    vals = np.empty(xs.shape[0])
    idx = np.empty(xs.shape[0], dtype=np.int64)
    _envelope_eval(slopes, intercepts, breakpoints, xs, vals, idx)
    return vals, idx


@njit(**_JIT)
def _far_lse(slopes, intercepts, xs, seg, cutoff, complete, out, trunc):
    K = slopes.shape[0]
    for i in range(xs.shape[0]):
        x = xs[i]
        k = seg[i]
        # line values fall monotonically moving away from the active segment,
        # so the far maximum sits at k + 3 or k - 3
        top = -math.inf
        if k + 3 < K:
            top = intercepts[k + 3] + slopes[k + 3] * x
        if k - 3 >= 0:
            top = max(top, intercepts[k - 3] + slopes[k - 3] * x)
        if top == -math.inf:
            out[i] = -math.inf
            if not complete:
                trunc[i] = True
            continue
        floor = top - cutoff
        acc = 0.0
        m = k + 3
        while m < K:
            v = intercepts[m] + slopes[m] * x
            if v < floor:
                break
            acc += math.exp(v - top)
            m += 1
        if not complete:
            trunc[i] = m >= K
        m = k - 3
        while m >= 0:
            v = intercepts[m] + slopes[m] * x
            if v < floor:
                break
            acc += math.exp(v - top)
            m -= 1
        out[i] = top + math.log(acc)


def far_lse(slopes, intercepts, xs, seg, cutoff, complete):
    xs = np.ascontiguousarray(xs, dtype=np.float64)
    seg = np.ascontiguousarray(seg, dtype=np.int64)
    out = np.empty(xs.shape[0])
    trunc = np.zeros(xs.shape[0], dtype=np.bool_)
    _far_lse(slopes, intercepts, xs, seg, float(cutoff), bool(complete), out, trunc)
    return out, trunc


@njit(**_JIT)
def _series_log_modulus(n, logc, log_t, theta, cutoff, cancel_tol, logmod, peak, status):
    K = n.shape[0]
    for i in range(log_t.shape[0]):
        lt = log_t[i]
        top = -math.inf
        for j in range(K):
            v = logc[j] if n[j] == 0.0 else logc[j] + n[j] * lt
            if v > top:
                top = v
        peak[i] = top
        if not (top > -math.inf):
            status[i] = 2
            logmod[i] = -math.inf
            continue
        re = 0.0
        im = 0.0
        th = theta[i]
        for j in range(K):
            v = logc[j] if n[j] == 0.0 else logc[j] + n[j] * lt
            if v >= top - cutoff:
                w = math.exp(v - top)
                a = n[j] * th
                re += w * math.cos(a)
                im += w * math.sin(a)
        mod = math.hypot(re, im)
        if mod < cancel_tol:
            status[i] = 1
            logmod[i] = -math.inf
        else:
            status[i] = 0
            logmod[i] = top + math.log(mod)


def series_log_modulus(exps, logc, log_t, theta, cutoff, cancel_tol):
    log_t = np.ascontiguousarray(log_t, dtype=np.float64)
    theta = np.ascontiguousarray(theta, dtype=np.float64)
    N = log_t.shape[0]
    logmod = np.empty(N)
    peak = np.empty(N)
    status = np.empty(N, dtype=np.int8)
    _series_log_modulus(np.ascontiguousarray(exps, dtype=np.float64),
                        np.ascontiguousarray(logc, dtype=np.float64),
                        log_t, theta, float(cutoff), float(cancel_tol),
                        logmod, peak, status)
    return logmod, peak, status
