"""Pure-numpy reference versions of the hot loops."""

from __future__ import annotations

import numpy as np

_CHUNK = 4096


def envelope_eval(slopes, intercepts, breakpoints, xs):
    """Value and active index of max_j (intercepts[j] + slopes[j] * x).

    ``breakpoints[j]`` separates term j from term j + 1; ties go to the
    smaller slope.
    """
    xs = np.asarray(xs, dtype=np.float64)
    idx = np.searchsorted(breakpoints, xs, side="left")
    n = slopes[idx]
    with np.errstate(invalid="ignore"):
        vals = intercepts[idx] + n * xs
    flat = n == 0.0
    if np.any(flat):
        vals = np.where(flat, intercepts[idx], vals)
    return vals, idx


def far_lse(slopes, intercepts, xs, seg, cutoff, complete):
    """log-sum-exp of the lines m with |m - seg| >= 3 at each x.

    Terms more than ``cutoff`` below the largest far term are dropped.  Lines
    are assumed to form an essential chain with ``seg`` the active index.  The
    second output flags points where, with ``complete`` false, the right end
    of the line list is still inside the cutoff window, so lines beyond the
    list could contribute.
    """
    xs = np.asarray(xs, dtype=np.float64)
    seg = np.asarray(seg, dtype=np.int64)
    K = slopes.shape[0]
    out = np.full(xs.shape, -np.inf)
    trunc = np.zeros(xs.shape, dtype=np.bool_)
    m = np.arange(K)[None, :]
    for start in range(0, xs.shape[0], _CHUNK):
        x = xs[start:start + _CHUNK]
        s = seg[start:start + _CHUNK]
        vals = intercepts[None, :] + slopes[None, :] * x[:, None]
        far = np.abs(m - s[:, None]) >= 3
        masked = np.where(far, vals, -np.inf)
        top = masked.max(axis=1)
        safe = np.where(np.isfinite(top), top, 0.0)
        keep = far & (masked >= safe[:, None] - cutoff)
        summed = np.exp(np.where(keep, masked - safe[:, None], -np.inf)).sum(axis=1)
        with np.errstate(divide="ignore"):
            out[start:start + x.shape[0]] = np.where(summed > 0.0, safe + np.log(summed), -np.inf)
        if not complete:
            last = vals[:, K - 1]
            trunc[start:start + x.shape[0]] = (s + 3 > K - 1) | (last >= safe - cutoff)
    return out, trunc


def series_log_modulus(exps, logc, log_t, theta, cutoff, cancel_tol):
    """log |sum_j exp(logc[j]) z^exps[j]| at z = exp(log_t + i theta).

    Returns ``(logmod, peak, status)``: ``peak`` is the dominant log term,
    ``status`` is 0 for a usable value, 1 when the scaled sum collapsed below
    ``cancel_tol`` (cancellation), 2 when no term survives (z = 0 without a
    constant term).  Non-zero status comes with ``logmod = -inf``.
    """
    log_t = np.asarray(log_t, dtype=np.float64)
    theta = np.asarray(theta, dtype=np.float64)
    n = exps.astype(np.float64)
    N = log_t.shape[0]
    logmod = np.full(N, -np.inf)
    peak = np.full(N, -np.inf)
    status = np.zeros(N, dtype=np.int8)
    for start in range(0, N, _CHUNK):
        lt = log_t[start:start + _CHUNK]
        th = theta[start:start + _CHUNK]
        with np.errstate(invalid="ignore"):
            vals = logc[None, :] + n[None, :] * lt[:, None]
        vals = np.where(n[None, :] == 0.0, logc[None, :], vals)
        vals = np.where(np.isnan(vals), -np.inf, vals)
        top = vals.max(axis=1)
        alive = np.isfinite(top)
        safe_top = np.where(alive, top, 0.0)
        keep = vals >= safe_top[:, None] - cutoff
        w = np.where(keep & alive[:, None], np.exp(vals - safe_top[:, None]), 0.0)
        ang = n[None, :] * th[:, None]
        re = (w * np.cos(ang)).sum(axis=1)
        im = (w * np.sin(ang)).sum(axis=1)
        mod = np.hypot(re, im)
        st = np.where(~alive, 2, np.where(mod < cancel_tol, 1, 0)).astype(np.int8)
        with np.errstate(divide="ignore"):
            lm = np.where(st == 0, safe_top + np.log(np.where(st == 0, mod, 1.0)), -np.inf)
        logmod[start:start + lt.shape[0]] = lm
        peak[start:start + lt.shape[0]] = top
        status[start:start + lt.shape[0]] = st
    return logmod, peak, status
