"""Sparse sub-envelopes of a tropical series.

Starting from the constant term, each step jumps as far ahead as possible
while the crossing with the current line stays strictly within ``h`` of the
full envelope.  The resulting chain is checked against the separation and
sandwich inequalities, then split by index mod 3 into three lacunary series.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .holomap import CUTOFF, LOG_HALF, LogPowerSeries
from .tropical import TropicalSeries
from .weights import LogTransform

MIN_H = 4.0
SLACK_TOL = 1e-12

FINITE_NOTE = ("finite source series: the chain terminates with the last source term "
               "active to the right of the last breakpoint")


class ChainWeightMismatch(ValueError):
    """A chain line lies above the weight's log-transform."""


@dataclass(eq=False)
class ThinnedChain:
    """Lines l_k = (slopes[k], intercepts[k]) with crossings x_k = breakpoints[k].

    Indices here are 0-based: ``breakpoints[k]`` is where line k hands over to
    line k + 1.  ``complete`` means the source series ran out, so the last line
    stays active forever; otherwise the chain was cut at ``k_max`` lines.
    """

    h: float
    slopes: np.ndarray
    intercepts: np.ndarray
    breakpoints: np.ndarray
    source_index: np.ndarray
    complete: bool
    source: TropicalSeries | None = field(default=None, repr=False)
    _xprime: np.ndarray | None = field(default=None, repr=False)
    _next_depth: list = field(default_factory=list, repr=False)

    def __len__(self) -> int:
        return int(self.slopes.size)

    @property
    def t(self) -> np.ndarray:
        """Radii t_k = exp(x_k)."""
        with np.errstate(over="ignore"):
            return np.exp(self.breakpoints)

    def line(self, k: int, x):
        n = self.slopes[k]
        b = self.intercepts[k]
        return b if n == 0 else b + n * np.asarray(x, dtype=np.float64)

    def envelope(self, x):
        xs = np.atleast_1d(np.asarray(x, dtype=np.float64))
        vals, _ = _kernels.envelope_eval(self.slopes.astype(np.float64), self.intercepts,
                                         self.breakpoints, xs)
        return float(vals[0]) if np.ndim(x) == 0 else vals

    def segment(self, x):
        """Index k with x in [x_{k-1}, x_k] (left-closed convention at ties)."""
        return np.searchsorted(self.breakpoints, np.asarray(x, dtype=np.float64), side="left")

    def certified_upper(self, cutoff: float = CUTOFF) -> float:
        """Largest x at which every truncated residue series still has its last
        entry at least ``cutoff`` below the chain envelope."""
        K = len(self)
        if self.complete:
            return math.inf
        if K < 4:
            return -math.inf
        tail = range(K - 3, K)

        def margin(x):
            return self.envelope(x) - max(self.line(j, x) for j in tail)

        # margin is nonincreasing left of x_{K-3}; bracket then bisect
        hi = float(self.breakpoints[K - 4]) if K >= 4 else 0.0
        if margin(hi) >= cutoff:
            return hi
        step = 1.0
        lo = hi - step
        while margin(lo) < cutoff:
            step *= 2.0
            lo = hi - step
            if step > 1e12:
                return -math.inf
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if margin(mid) >= cutoff:
                lo = mid
            else:
                hi = mid
            if hi - lo <= 1e-12 * max(1.0, abs(lo)):
                break
        return lo

    def to_json(self) -> dict:
        out = {"h": self.h,
               "terms": [{"slope": int(n), "intercept": float(b)}
                         for n, b in zip(self.slopes, self.intercepts)],
               "breakpoints": [float(x) for x in self.breakpoints],
               "source_index": [int(i) for i in self.source_index],
               "complete": self.complete}
        if self.complete:
            out["note"] = FINITE_NOTE
        return out


def _crossing(n0: int, b0: float, n1: int, b1: float) -> float:
    return (b0 - b1) / (n1 - n0)


def thin(T: TropicalSeries, h: float = MIN_H, k_max: int = 64) -> ThinnedChain:
    """Select up to ``k_max`` lines of ``T`` with separation parameter ``h``."""
    if not h >= MIN_H:
        raise ValueError("h must be ≥ 4")
    if k_max < 1:
        raise ValueError("k_max must be >= 1")
    if not T.has_term(0):
        raise ValueError("tropical series has no terms")
    first = T.term(0)
    if first.slope != 0:
        raise ValueError("first term must have slope 0 (prepend the constant term)")

    idx = [0]
    bps: list[float] = []
    xprime: list[float] = []
    next_depth: list[float | None] = []
    complete = False
    while len(idx) < k_max:
        m = idx[-1]
        if not T.has_term(m + 1):
            complete = True
            break
        cur = T.term(m)
        nxt = T.term(m + 1)
        xprime.append(_crossing(cur.slope, cur.intercept, nxt.slope, nxt.intercept))
        s = 1
        chosen_x = xprime[-1]
        rejected = None
        while T.has_term(m + s):
            cand = T.term(m + s)
            xi = _crossing(cur.slope, cur.intercept, cand.slope, cand.intercept)
            y = cur.intercept if cur.slope == 0 else cur.intercept + cur.slope * xi
            tv, _ = T.value_at(xi)
            if y > tv - h:
                chosen_x = xi
                s += 1
            else:
                rejected = tv - y
                break
        s = max(s - 1, 1)
        idx.append(m + s)
        bps.append(chosen_x)
        next_depth.append(rejected)
    else:
        complete = not T.has_term(idx[-1] + 1)

    terms = [T.term(i) for i in idx]
    bp = np.array(bps, dtype=np.float64)
    if bp.size > 1 and not np.all(np.diff(bp) > 0):
        raise RuntimeError("chain breakpoints are not increasing")
    return ThinnedChain(
        h=float(h),
        slopes=np.array([t.slope for t in terms], dtype=np.int64),
        intercepts=np.array([t.intercept for t in terms], dtype=np.float64),
        breakpoints=bp,
        source_index=np.array(idx, dtype=np.int64),
        complete=complete,
        source=T,
        _xprime=np.array(xprime, dtype=np.float64),
        _next_depth=next_depth,
    )


# -- verification ---------------------------------------------------------

@dataclass
class InequalityReport:
    name: str
    checked: int = 0
    min_slack: float = math.inf
    violations: list[dict] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.violations

    def add(self, k, x, lhs, rhs, tol, limit: int = 100) -> None:
        """Record lhs <= rhs on arrays; violations when rhs - lhs < -tol."""
        x = np.atleast_1d(np.asarray(x, dtype=np.float64))
        if x.size == 0:
            return
        k, lhs, rhs, tol = np.broadcast_arrays(np.asarray(k), np.asarray(lhs, dtype=np.float64),
                                               np.asarray(rhs, dtype=np.float64),
                                               np.asarray(tol, dtype=np.float64), x)[:4]
        slack = rhs - lhs
        self.checked += int(slack.size)
        self.min_slack = min(self.min_slack, float(slack.min()))
        for i in np.nonzero(slack < -tol)[0]:
            if len(self.violations) >= limit:
                break
            self.violations.append({"k": int(k[i]), "x": float(x[i]), "lhs": float(lhs[i]),
                                    "rhs": float(rhs[i]), "slack": float(slack[i])})

    def to_json(self) -> dict:
        return {"name": self.name, "checked": self.checked, "min_slack": self.min_slack,
                "passed": self.passed, "violations": self.violations}


@dataclass
class SeparationReport:
    grid: InequalityReport
    endpoints: InequalityReport

    @property
    def exact_certificate(self) -> bool:
        # both sides are affine, so the endpoint check covers each half-line
        return self.endpoints.passed and self.endpoints.checked > 0

    @property
    def passed(self) -> bool:
        return self.grid.passed and self.endpoints.passed

    def to_json(self) -> dict:
        return {"grid": self.grid.to_json(), "endpoints": self.endpoints.to_json(),
                "exact_certificate": self.exact_certificate, "passed": self.passed}


def verify_separation(chain: ThinnedChain, grid, tol: float = SLACK_TOL) -> SeparationReport:
    """l_{k-1} >= l_{k+2} + h left of x_{k-1}; l_{k+2} >= l_{k-1} + h right of x_{k+1}.

    ``k`` in the report is 1-based as in the chain numbering l_1, l_2, ...
    """
    grid = np.asarray(grid, dtype=np.float64)
    g_rep = InequalityReport("separation")
    e_rep = InequalityReport("separation_endpoints")
    K = len(chain)
    x = chain.breakpoints  # x[j] is x_{j+1}
    for k in range(2, K - 1):
        lo_line, hi_line = k - 2, k + 1  # 0-based l_{k-1}, l_{k+2}
        x_left, x_right = x[k - 2], x[k]
        # left half-line
        left = grid[grid <= x_left]
        g_rep.add(k, left, chain.line(hi_line, left) + chain.h, chain.line(lo_line, left), tol)
        e_rep.add(k, x_left, chain.line(hi_line, x_left) + chain.h,
                  chain.line(lo_line, x_left), tol)
        right = grid[grid >= x_right]
        g_rep.add(k, right, chain.line(lo_line, right) + chain.h, chain.line(hi_line, right), tol)
        e_rep.add(k, x_right, chain.line(lo_line, x_right) + chain.h,
                  chain.line(hi_line, x_right), tol)
    return SeparationReport(g_rep, e_rep)


@dataclass
class ChainBoundsReport:
    below: InequalityReport
    sandwich: InequalityReport
    tail: InequalityReport
    truncated_points: int
    x_max: float
    note: str = ""

    @property
    def passed(self) -> bool:
        return self.below.passed and self.sandwich.passed and self.tail.passed

    def to_json(self) -> dict:
        return {"below": self.below.to_json(), "sandwich": self.sandwich.to_json(),
                "tail": self.tail.to_json(), "truncated_points": self.truncated_points,
                "x_max": self.x_max, "passed": self.passed, "note": self.note}


def _tolerance(values: np.ndarray, tol: float) -> np.ndarray:
    return tol * np.maximum(1.0, np.abs(values))


def verify_chain_bounds(chain: ThinnedChain, w: LogTransform, grid, *,
                        tol: float = SLACK_TOL, cutoff: float = CUTOFF) -> ChainBoundsReport:
    """Check, with 1-based k:

    (i)   l_k(x) <= Phi(x) everywhere on the grid (a failure raises);
    (ii)  Phi(x) - h <= l_k(x) on [x_{k-1}, x_k];
    (iii) log sum_{|m-k|>=3} exp(l_m(x)) <= log(1/2) + l_k(x) on [x_{k-1}, x_k].

    Slack tolerance is ``tol`` relative to max(1, |Phi|).  For a chain cut at
    k_max, points right of the last breakpoint are skipped (the next
    breakpoint is unknown) and reported via ``x_max``.
    """
    grid = np.sort(np.asarray(grid, dtype=np.float64))
    K = len(chain)
    x_max = math.inf if chain.complete else (float(chain.breakpoints[-1]) if K > 1 else -math.inf)
    xs = grid[grid <= x_max]
    phi = np.asarray(w.phi(xs), dtype=np.float64)
    scale = _tolerance(phi, tol)

    below = InequalityReport("below")
    for k in range(K):
        below.add(k + 1, xs, chain.line(k, xs) * np.ones_like(xs), phi, scale)
    if not below.passed:
        v = below.violations[0]
        raise ChainWeightMismatch(
            f"chain line {v['k']} exceeds Phi at x={v['x']!r} by {-v['slack']:.3g}")

    seg = chain.segment(xs).astype(np.int64)
    own = chain.intercepts[seg] + chain.slopes[seg] * xs
    own = np.where(chain.slopes[seg] == 0, chain.intercepts[seg], own)

    sandwich = InequalityReport("sandwich")
    sandwich.add(seg + 1, xs, phi - chain.h, own, scale)

    tail = InequalityReport("tail")
    lse, trunc = _kernels.far_lse(chain.slopes.astype(np.float64), chain.intercepts, xs, seg,
                                  cutoff, chain.complete)
    tail.add(seg + 1, xs, lse, LOG_HALF + own, scale)
    note = FINITE_NOTE if chain.complete else ""
    return ChainBoundsReport(below, sandwich, tail, int(np.count_nonzero(trunc)), x_max, note)


def split(chain: ThinnedChain) -> tuple[LogPowerSeries, LogPowerSeries, LogPowerSeries]:
    """G_1, G_2, G_3: chain lines l_j (1-based) with j = Delta mod 3."""
    if len(chain) == 0:
        raise ValueError("empty chain")
    truncated = not chain.complete
    return tuple(
        LogPowerSeries(chain.slopes[d::3], chain.intercepts[d::3],
                       truncated=truncated, truncation_index=len(chain))
        for d in range(3))
