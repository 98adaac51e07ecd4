"""Tropical power series: upper envelopes of integer-slope lines.

A :class:`TropicalSeries` stores only essential terms (each one is the strict
maximum on a nonempty open interval), with slopes strictly increasing and the
breakpoints where the active term changes.  Series may be finite or backed by
a lazy generator; lazy series memoize the resolved prefix.
"""

from __future__ import annotations

import bisect
import itertools
import math
import statistics
import threading
from dataclasses import asdict, dataclass, field
from typing import Iterable, Iterator, Sequence

import numpy as np

from . import _kernels
from .weights import LogTransform, is_rapid

ESSENTIAL_XTOL = 1e-12
BISECT_XTOL = 1e-12
DEFAULT_MAX_TERMS = 2_000_000


class LazySeriesError(RuntimeError):
    """A lazy series ran out of terms, or revised a term already handed out."""


class NonRapidWeightError(ValueError):
    """The operation needs a rapid weight (unbounded Phi')."""


@dataclass(frozen=True)
class TropicalTerm:
    slope: int
    intercept: float

    def __post_init__(self):
        if self.slope < 0:
            raise ValueError(f"slope must be nonnegative, got {self.slope}")

    def __call__(self, x):
        return self.intercept + self.slope * x


def _crossing(n0, b0, n1, b1):
    return (b0 - b1) / (n1 - n0)


def _dominated(n0, b0, n1, b1, n2, b2, xtol):
    """True when line 1 never strictly beats both neighbours (n0 < n1 < n2)."""
    left = _crossing(n0, b0, n1, b1)
    right = _crossing(n1, b1, n2, b2)
    return left >= right - xtol * max(1.0, abs(right))


def essential_lines(slopes, intercepts, xtol: float = ESSENTIAL_XTOL):
    """Upper envelope of arbitrary real-slope lines.

    Returns ``(slopes, intercepts, breakpoints)`` of the essential lines in
    increasing slope order.  Equal slopes keep the largest intercept.
    """
    slopes = np.asarray(slopes, dtype=np.float64)
    intercepts = np.asarray(intercepts, dtype=np.float64)
    if slopes.size == 0:
        raise ValueError("need at least one line")
    order = np.lexsort((-intercepts, slopes))
    ns, bs = [], []
    last = None
    for i in order:
        n, b = float(slopes[i]), float(intercepts[i])
        if n == last:
            continue
        last = n
        while len(ns) >= 2 and _dominated(ns[-2], bs[-2], ns[-1], bs[-1], n, b, xtol):
            ns.pop()
            bs.pop()
        ns.append(n)
        bs.append(b)
    ns_a, bs_a = np.array(ns), np.array(bs)
    bps = (bs_a[:-1] - bs_a[1:]) / (ns_a[1:] - ns_a[:-1])
    return ns_a, bs_a, bps


class TropicalSeries:
    """Essential terms of max_m (B_m + N_m x), finite or lazily generated.

    Lazy series pull raw terms (strictly increasing slopes) from a generator
    and filter them incrementally.  Term ``i`` is handed out only once a later
    term has been pushed after it; if a later term would still remove a handed
    out term, :class:`LazySeriesError` is raised rather than silently changing
    the prefix.  ``infinite=True`` declares that the generator never ends, so
    exhaustion is an error.
    """

    def __init__(self, generator: Iterable[tuple[int, float]] | None = None, *,
                 infinite: bool = False, max_terms: int = DEFAULT_MAX_TERMS,
                 xtol: float = ESSENTIAL_XTOL, unattained: Sequence[int] = (),
                 label: str = ""):
        self._n: list[int] = []
        self._b: list[float] = []
        self._bp: list[float] = []  # breakpoints between committed terms
        self._committed = 0
        self._gen: Iterator | None = iter(generator) if generator is not None else None
        self._done = generator is None
        self._infinite = infinite
        self._max_terms = max_terms
        self._xtol = xtol
        self._lock = threading.RLock()
        self._cache: tuple | None = None
        self.unattained = list(unattained)
        self.label = label

    # -- construction -------------------------------------------------
    @classmethod
    def _from_filtered(cls, slopes, intercepts, **kw) -> TropicalSeries:
        s = cls(**kw)
        s._n = [int(n) for n in slopes]
        s._b = [float(b) for b in intercepts]
        s._committed = len(s._n)
        s._bp = [_crossing(s._n[i], s._b[i], s._n[i + 1], s._b[i + 1])
                 for i in range(len(s._n) - 1)]
        return s

    @classmethod
    def lazy(cls, generator: Iterable[tuple[int, float]], *, infinite: bool = True,
             **kw) -> TropicalSeries:
        return cls(generator, infinite=infinite, **kw)

    def _push(self, n: int, b: float) -> None:
        if self._n and n <= self._n[-1]:
            raise LazySeriesError(
                f"lazy generator must yield strictly increasing slopes ({n} after {self._n[-1]})")
        while len(self._n) >= 2 and _dominated(self._n[-2], self._b[-2], self._n[-1],
                                               self._b[-1], n, b, self._xtol):
            if len(self._n) - 1 < self._committed:
                raise LazySeriesError(
                    f"term with slope {self._n[-1]} was handed out but is not essential")
            self._n.pop()
            self._b.pop()
        self._n.append(int(n))
        self._b.append(float(b))

    def _advance(self) -> None:
        if len(self._n) >= self._max_terms:
            raise LazySeriesError(f"lazy series exceeded {self._max_terms} terms")
        try:
            n, b = next(self._gen)
        except StopIteration:
            self._done = True
            if self._infinite:
                raise LazySeriesError("generator of an infinite series was exhausted") from None
            return
        self._push(n, b)

    def _commit_one(self) -> None:
        i = self._committed
        if i > 0:
            self._bp.append(_crossing(self._n[i - 1], self._b[i - 1], self._n[i], self._b[i]))
        self._committed += 1

    def ensure(self, count: int) -> bool:
        """Resolve at least ``count`` terms; False if the series is shorter."""
        with self._lock:
            while self._committed < count:
                if self._done:
                    if self._committed < len(self._n):
                        self._commit_one()
                        continue
                    return False
                if len(self._n) >= self._committed + 2:
                    self._commit_one()
                else:
                    self._advance()
            return True

    def resolve_to(self, x: float) -> None:
        """Resolve until the active term at ``x`` is final."""
        if not math.isfinite(x):
            if x == -math.inf:
                self.ensure(1)
                return
            raise LazySeriesError("cannot resolve a lazy series at +inf")
        with self._lock:
            while True:
                c = self._committed
                if c >= 2 and self._bp[c - 2] >= x:
                    return
                if not self.ensure(c + 1):
                    return

    # -- views ----------------------------------------------------------
    @property
    def is_lazy(self) -> bool:
        return not (self._done and self._committed == len(self._n))

    def __len__(self) -> int:
        if self.is_lazy:
            raise TypeError("length of an unresolved lazy series is unknown")
        return self._committed

    @property
    def n_resolved(self) -> int:
        return self._committed

    def _arrays(self):
        with self._lock:
            c = self._committed
            if self._cache is None or self._cache[0] != c:
                self._cache = (c, np.array(self._n[:c], dtype=np.int64),
                               np.array(self._b[:c], dtype=np.float64),
                               np.array(self._bp[:max(c - 1, 0)], dtype=np.float64))
            return self._cache[1:]

    @property
    def slopes(self) -> np.ndarray:
        return self._arrays()[0]

    @property
    def intercepts(self) -> np.ndarray:
        return self._arrays()[1]

    @property
    def breakpoints(self) -> np.ndarray:
        return self._arrays()[2]

    def term(self, i: int) -> TropicalTerm:
        if i < 0 or not self.ensure(i + 1):
            raise IndexError(i)
        return TropicalTerm(self._n[i], self._b[i])

    def has_term(self, i: int) -> bool:
        return i >= 0 and self.ensure(i + 1)

    def terms(self) -> list[TropicalTerm]:
        n, b, _ = self._arrays()
        return [TropicalTerm(int(k), float(v)) for k, v in zip(n, b)]

    def prefix(self, count: int) -> TropicalSeries:
        self.ensure(count)
        n, b, _ = self._arrays()
        return TropicalSeries._from_filtered(n[:count], b[:count])

    # -- evaluation -------------------------------------------------------
    def value_at(self, x: float) -> tuple[float, int]:
        """Scalar fast path of :meth:`evaluate`."""
        self.resolve_to(x)
        with self._lock:
            c = self._committed
            i = bisect.bisect_left(self._bp, x, 0, max(c - 1, 0))
            n = self._n[i]
            return (self._b[i] if n == 0 else self._b[i] + n * x), i

    def evaluate(self, x):
        """Envelope value and index of the attaining term (ties: smallest slope)."""
        xs = np.atleast_1d(np.asarray(x, dtype=np.float64))
        finite = xs[np.isfinite(xs)]
        if finite.size:
            self.resolve_to(float(finite.max()))
        else:
            self.ensure(1)
        if np.any(xs == np.inf) and self.is_lazy:
            raise LazySeriesError("cannot evaluate a lazy series at +inf")
        n, b, bp = self._arrays()
        vals, idx = _kernels.envelope_eval(n.astype(np.float64), b, bp, xs)
        if np.ndim(x) == 0:
            return float(vals[0]), int(idx[0])
        return vals, idx

    def __call__(self, x):
        return self.evaluate(x)[0]

    # -- serialization ------------------------------------------------------
    def to_json(self) -> dict:
        n, b, _ = self._arrays()
        out = {"terms": [{"slope": int(k), "intercept": float(v)} for k, v in zip(n, b)]}
        if self.unattained:
            out["unattained"] = [int(k) for k in self.unattained]
        return out

    @classmethod
    def from_json(cls, data: dict) -> TropicalSeries:
        return essential_filter(
            [TropicalTerm(int(t["slope"]), float(t["intercept"])) for t in data["terms"]])

    def __repr__(self) -> str:
        kind = "lazy" if self.is_lazy else "finite"
        return f"TropicalSeries({kind}, {self._committed} resolved terms)"


def evaluate(T: TropicalSeries, x):
    """max over terms of b + n x, with the index of the attaining term."""
    return T.evaluate(x)


def essential_filter(raw: Iterable[TropicalTerm | tuple[int, float]],
                     xtol: float = ESSENTIAL_XTOL) -> TropicalSeries:
    """Essential subset of a finite term list (upper envelope of lines).

    Lines whose dominance interval is shorter than ``xtol`` (relative) are
    treated as touching the envelope at a single point and dropped.
    """
    terms = [t if isinstance(t, TropicalTerm) else TropicalTerm(int(t[0]), float(t[1]))
             for t in raw]
    if not terms:
        raise ValueError("essential_filter needs at least one term")
    n, b, _ = essential_lines([t.slope for t in terms], [t.intercept for t in terms], xtol)
    return TropicalSeries._from_filtered(n, b, xtol=xtol)


# -- monomial minorant ------------------------------------------------------

@dataclass(frozen=True)
class SupportPoint:
    """Where the line of slope k touches Phi from below."""
    slope: int
    x: float  # inf when only approached asymptotically
    intercept: float  # inf_x (Phi(x) - k x)
    status: str  # "attained" | "asymptotic"


def _bracketed_argmax(w: LogTransform, k: float) -> float | None:
    """Maximizer of k x - Phi(x) by geometric bracket expansion and bisection."""
    lo = w.x_floor
    if w.dphi(lo) >= k:
        return lo
    step = 1.0
    hi = lo + step
    while w.dphi(hi) < k:
        lo = hi
        step *= 2.0
        if step > 2.0 ** 80:
            return None
        hi = w.x_floor + step
    while hi - lo > BISECT_XTOL:
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if w.dphi(mid) < k:
            lo = mid
        else:
            hi = mid
    return lo if w.phi(lo) - k * lo <= w.phi(hi) - k * hi else hi


def _asymptotic_intercept(w: LogTransform, k: float) -> float:
    """lim_{x->inf} Phi(x) - k x for a slope approached but never reached."""
    best = w.phi(w.x_floor) - k * w.x_floor
    prev = math.inf
    for j in range(200):
        x = w.x_floor + 2.0 ** j
        v = float(w.phi(x) - k * x)
        best = min(best, v)
        if j >= 4 and abs(v - prev) <= 1e-15 * max(1.0, abs(v)):
            break
        prev = v
    return best


def support_point(w: LogTransform, k: int, *, use_inverse: bool = True) -> SupportPoint | None:
    """Tangency of slope ``k`` with Phi; ``None`` if the slope is never reached."""
    if k > w.sup_slope:
        return None
    if k == w.sup_slope and not w.sup_attained:
        return SupportPoint(k, math.inf, _asymptotic_intercept(w, k), "asymptotic")
    x = None
    if use_inverse and w.dphi_inverse is not None:
        x = float(w.dphi_inverse(float(k)))
        if math.isnan(x):
            return None
        if math.isinf(x):
            return SupportPoint(k, math.inf, _asymptotic_intercept(w, k), "asymptotic")
    else:
        x = _bracketed_argmax(w, float(k))
        if x is None:
            return None
    return SupportPoint(k, x, float(w.phi(x)) - k * x, "attained")


def monomial_minorant(w: LogTransform, slopes: Iterable[int] | None = None, *,
                      use_inverse: bool = True) -> TropicalSeries:
    """Envelope of the monomials touching w from below, in the log domain.

    Each slope k contributes the line k x + inf_y (Phi(y) - k y), i.e. the
    term t^k / u_k with u_k = sup t^k / w(t).  With ``slopes=None`` the series
    is lazy over k = 0, 1, 2, ...; it ends (finite series) at the first slope
    that Phi' never reaches.  Unreached slopes are listed in ``.unattained``.
    """
    if slopes is not None:
        raw, unattained = [], []
        for k in slopes:
            if k < 0:
                raise ValueError("slopes must be nonnegative")
            sp = support_point(w, int(k), use_inverse=use_inverse)
            if sp is None:
                unattained.append(int(k))
            else:
                raw.append(TropicalTerm(int(k), sp.intercept))
        if not raw:
            raise NonRapidWeightError("no requested slope touches the weight")
        series = essential_filter(raw)
        series.unattained = unattained
        series.label = f"minorant of {w.name}"
        return series

    holder: list[TropicalSeries] = []

    def gen():
        for k in itertools.count():
            sp = support_point(w, k, use_inverse=use_inverse)
            if sp is None:
                holder[0].unattained.append(k)
                return
            yield k, sp.intercept

    series = TropicalSeries.lazy(gen(), infinite=w.is_rapid_family,
                                 label=f"minorant of {w.name}")
    holder.append(series)
    return series


def essentiality_ratio(w: LogTransform, T: TropicalSeries, grid) -> float:
    """sup over the grid of Phi(x) - T(x): log of the best witnessed constant C."""
    g = np.asarray(grid, dtype=np.float64)
    return float(np.max(np.asarray(w.phi(g)) - T(g)))


@dataclass(frozen=True)
class AssociatedBracket:
    """[P(t), 6 P(t)], kept in log form to survive huge magnitudes."""
    t: float
    log_lo: float
    log_hi: float

    @property
    def lo(self) -> float:
        return math.exp(self.log_lo) if self.log_lo < 709.0 else math.inf

    @property
    def hi(self) -> float:
        return math.exp(self.log_hi) if self.log_hi < 709.0 else math.inf


def associated_weight_bracket(w: LogTransform, T: TropicalSeries, t: float) -> AssociatedBracket:
    own_envelope = w.spec is not None and w.spec.family == "tropical"  # P = w exactly
    if not (w.is_rapid_family or own_envelope):
        raise NonRapidWeightError(
            f"{w.name} is non-rapid; it is equivalent to 1 + t^m (polynomial case)")
    if t < 0:
        raise ValueError("t must be nonnegative")
    x = math.log(t) if t > 0 else -math.inf
    log_p = T.value_at(x)[0]
    return AssociatedBracket(float(t), log_p, log_p + math.log(6.0))


# -- tangent gaps and classification ---------------------------------------

@dataclass(frozen=True)
class TangentGapRecord:
    n: int
    a_n: float  # Phi'(a_n) = n
    d_n: float  # crossing of the tangents of slopes n and n + 1
    h_n: float  # Phi(d_n) - L_n(d_n)


def tangent_gaps(w: LogTransform, n_range: Iterable[int], *,
                 use_inverse: bool = True) -> list[TangentGapRecord]:
    """Vertical gaps between Phi and consecutive integer-slope tangents.

    Slopes whose tangent (or that of n + 1) does not exist are skipped.
    """
    cache: dict[int, SupportPoint | None] = {}

    def sp(k):
        if k not in cache:
            p = support_point(w, k, use_inverse=use_inverse)
            cache[k] = p if p is not None and p.status == "attained" else None
        return cache[k]

    out = []
    for n in n_range:
        p0, p1 = sp(n), sp(n + 1)
        if p0 is None or p1 is None:
            continue
        d = p0.intercept - p1.intercept  # (c_n - c_{n+1}) / ((n+1) - n)
        h = float(w.phi(d)) - (p0.intercept + n * d)
        out.append(TangentGapRecord(n, p0.x, d, h))
    return out


VERDICTS = ("tropical_evidence", "non_tropical_evidence", "non_rapid_polynomial", "inconclusive")

CAVEAT = ("Finite probe: gaps and ratios are computed on a bounded slope range and grid; "
          "they evidence but cannot prove finiteness of sup h_n (or of the constant C).")


@dataclass
class ClassifyParams:
    n_range: range = range(1, 201)
    slope_threshold: float | None = None  # default: max slope in n_range + 1
    x_max: float = 1e6
    bound: float | None = None
    divergence_factor: float = 10.0
    cap: float = 10.0
    grid_points: int = 2000


@dataclass
class ClassificationReport:
    rapid: bool
    probe: dict
    gaps: list[TangentGapRecord]
    sup_gap: float
    ratio_evidence: float
    verdict: str
    caveat: str = CAVEAT
    details: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "rapid": self.rapid,
            "probe": self.probe,
            "verdict": self.verdict,
            "sup_gap": self.sup_gap,
            "ratio_evidence": self.ratio_evidence,
            "caveat": self.caveat,
            "details": self.details,
            "gaps": [asdict(g) for g in self.gaps],
        }


def classify(w: LogTransform, params: ClassifyParams | None = None) -> ClassificationReport:
    """Graded evidence on whether w is equivalent to a log-tropical weight.

    Decision rule: non-rapid -> ``non_rapid_polynomial``; otherwise the gaps
    over the tail half of the slope range are compared with a bound (1/Phi''
    probed at the tail tangency points when that probe exceeds 1/cap, else
    ``cap``) and with ``divergence_factor`` times the median of the first
    tenth of the range.  Flat or shrinking gaps under the bound give
    ``tropical_evidence``; growing gaps past the divergence level give
    ``non_tropical_evidence``; anything else is ``inconclusive``.
    """
    p = params or ClassifyParams()
    n_range = list(p.n_range)
    threshold = p.slope_threshold if p.slope_threshold is not None else max(n_range) + 1
    rapid = is_rapid(w, threshold, p.x_max)
    with np.errstate(over="ignore"):
        probe = {"slope_threshold": float(threshold), "x_max": float(p.x_max),
                 "dphi_at_x_max": float(w.dphi(p.x_max))}
    details: dict = {"n_range": [n_range[0], n_range[-1]]}

    if not rapid:
        half = float(w.dphi(p.x_max / 2.0)) if p.x_max > 0 else 0.0
        plateau = (math.isfinite(w.sup_slope)
                   or probe["dphi_at_x_max"] - half <= 1e-6 * max(1.0, probe["dphi_at_x_max"]))
        degree = w.sup_slope if math.isfinite(w.sup_slope) else probe["dphi_at_x_max"]
        details["polynomial_degree"] = int(round(degree))
        return ClassificationReport(False, probe, [], 0.0, 0.0,
                                    "non_rapid_polynomial" if plateau else "inconclusive",
                                    details=details)

    gaps = tangent_gaps(w, n_range)
    if len(gaps) < 4:
        return ClassificationReport(True, probe, gaps, max((g.h_n for g in gaps), default=0.0),
                                    0.0, "inconclusive", details=details)
    h = np.array([g.h_n for g in gaps])
    tail = h[len(h) // 2:]
    early = h[:max(1, len(h) // 10)]
    q = len(tail) // 2
    m_prev, m_last = float(tail[:q].mean()), float(tail[q:].mean())
    increasing = m_last > m_prev * (1.0 + 1e-6) + 1e-12
    tail_points = np.array([g.a_n for g in gaps[len(h) // 2:]])
    curvature = float(np.min(w.ddphi(tail_points)))
    if p.bound is not None:
        bound = p.bound
    else:
        bound = 1.0 / curvature if curvature > 1.0 / p.cap else p.cap
    tail_max = float(tail.max())
    early_median = float(statistics.median(early))
    if tail_max <= bound and not increasing:
        verdict = "tropical_evidence"
    elif tail_max > p.divergence_factor * early_median and increasing:
        verdict = "non_tropical_evidence"
    else:
        verdict = "inconclusive"

    last_d = gaps[-1].d_n
    grid = np.union1d(np.linspace(w.x_floor, last_d, p.grid_points), [g.d_n for g in gaps])
    T = monomial_minorant(w, range(0, n_range[-1] + 2))
    ratio = essentiality_ratio(w, T, grid)
    details.update(tail_max=tail_max, bound=bound, curvature_probe=curvature,
                   early_median=early_median, tail_trend="increasing" if increasing
                   else "non_increasing", ratio_grid=[float(grid[0]), float(grid[-1]), int(grid.size)])
    return ClassificationReport(True, probe, gaps, float(h.max()), ratio, verdict, details=details)
