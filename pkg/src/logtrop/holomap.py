"""Lacunary positive-coefficient series, the three-series bound, and the
holomorphic/harmonic maps assembled from them.

Everything is kept in the log domain: a series stores log-coefficients and is
evaluated as ``peak + log|scaled sum|`` so doubly exponential magnitudes never
get materialized.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import _kernels
from .tropical import TropicalSeries
from .weights import LogTransform

CUTOFF = 40.0
CANCEL_TOL = 1e-12
LOG_HALF = math.log(0.5)
LOG_SIX = math.log(6.0)

CERTIFICATE_CAVEAT = ("Grid evidence: inequalities are checked at the listed radii and phases only; "
                      "nonvanishing of immersion components is likewise checked on a finite grid.")


class NearZeroModulus(ArithmeticError):
    """The series sum cancelled below resolution (or z = 0 with no constant term)."""

    def __init__(self, log_t: float, theta: float, exact_zero: bool):
        kind = "exact zero" if exact_zero else "cancellation"
        super().__init__(f"{kind} at log_t={log_t!r}, theta={theta!r}")
        self.log_t = log_t
        self.theta = theta
        self.exact_zero = exact_zero


class TruncationError(RuntimeError):
    """A truncated series' dropped tail is not negligible at a grid point."""

    def __init__(self, x: float, gap: float):
        super().__init__(
            f"truncation insufficient at log_t={x!r}: last kept term only {gap:.3g} "
            f"log-units below the dominant term (need {CUTOFF:g})")
        self.x = x
        self.gap = gap


class ImmersionSearchError(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class LogPowerSeries:
    """sum_k exp(log_coefficients[k]) z^exponents[k], all coefficients positive.

    ``truncated`` marks a finite view of an infinite series; ``truncation_index``
    is the length of the chain it was cut from.
    """

    exponents: np.ndarray
    log_coefficients: np.ndarray
    truncated: bool = False
    truncation_index: int | None = None

    def __post_init__(self):
        n = np.asarray(self.exponents, dtype=np.int64).reshape(-1)
        b = np.asarray(self.log_coefficients, dtype=np.float64).reshape(-1)
        if n.shape != b.shape:
            raise ValueError("exponents and log_coefficients differ in length")
        if n.size and (n[0] < 0 or np.any(np.diff(n) <= 0)):
            raise ValueError("exponents must be nonnegative and strictly increasing")
        if not np.all(np.isfinite(b)):
            raise ValueError("log-coefficients must be finite")
        object.__setattr__(self, "exponents", n)
        object.__setattr__(self, "log_coefficients", b)

    @classmethod
    def from_entries(cls, entries: Sequence[tuple[int, float]], **kw) -> LogPowerSeries:
        entries = list(entries)
        return cls(np.array([e[0] for e in entries], dtype=np.int64),
                   np.array([e[1] for e in entries], dtype=np.float64), **kw)

    def __len__(self) -> int:
        return int(self.exponents.size)

    @property
    def entries(self) -> list[tuple[int, float]]:
        return [(int(n), float(b)) for n, b in zip(self.exponents, self.log_coefficients)]

    def derivative(self) -> LogPowerSeries:
        keep = self.exponents > 0
        n = self.exponents[keep]
        return LogPowerSeries(n - 1, self.log_coefficients[keep] + np.log(n.astype(np.float64)),
                              self.truncated, self.truncation_index)

    def with_identity(self) -> LogPowerSeries:
        """This series plus z (exponent 1, coefficient 1)."""
        if np.any(self.exponents == 1):
            raise ValueError("series already has a linear term")
        pos = int(np.searchsorted(self.exponents, 1))
        return LogPowerSeries(np.insert(self.exponents, pos, 1),
                              np.insert(self.log_coefficients, pos, 0.0),
                              self.truncated, self.truncation_index)

    def term_values(self, log_t) -> np.ndarray:
        lt = np.atleast_1d(np.asarray(log_t, dtype=np.float64))
        with np.errstate(invalid="ignore"):
            v = self.log_coefficients[None, :] + self.exponents[None, :] * lt[:, None]
        return np.where(self.exponents[None, :] == 0, self.log_coefficients[None, :], v)

    def log_modulus(self, log_t, theta, cutoff: float = CUTOFF,
                    cancel_tol: float = CANCEL_TOL):
        """Vectorized (logmod, peak, status); see :func:`eval_log_modulus`."""
        lt = np.atleast_1d(np.asarray(log_t, dtype=np.float64))
        th = np.broadcast_to(np.asarray(theta, dtype=np.float64), lt.shape)
        if len(self) == 0:
            return (np.full(lt.shape, -np.inf), np.full(lt.shape, -np.inf),
                    np.full(lt.shape, 2, dtype=np.int8))
        return _kernels.series_log_modulus(self.exponents, self.log_coefficients,
                                           lt, th, cutoff, cancel_tol)

    def __call__(self, z):
        """Complex value at z (overflows to inf/nan for huge |z|)."""
        z = np.asarray(z, dtype=np.complex128)
        flat = np.atleast_1d(z)
        if len(self) == 0:
            out = np.zeros(flat.shape, dtype=np.complex128)
        else:
            with np.errstate(divide="ignore"):
                lt = np.log(np.abs(flat))
            v = self.term_values(lt)
            top = v.max(axis=1)
            alive = np.isfinite(top)
            safe = np.where(alive, top, 0.0)
            w = np.where(alive[:, None], np.exp(v - safe[:, None]), 0.0)
            res = (w * np.exp(1j * self.exponents[None, :] * np.angle(flat)[:, None])).sum(axis=1)
            with np.errstate(over="ignore", invalid="ignore"):
                out = np.where(alive, np.exp(safe) * res, 0.0)
        return out[0] if z.ndim == 0 else out.reshape(z.shape)

    def to_json(self) -> dict:
        return {"entries": [{"exponent": n, "log_coefficient": b} for n, b in self.entries],
                "truncated": self.truncated, "truncation_index": self.truncation_index}

    @classmethod
    def from_json(cls, data: dict) -> LogPowerSeries:
        return cls.from_entries([(int(e["exponent"]), float(e["log_coefficient"]))
                                 for e in data["entries"]],
                                truncated=bool(data.get("truncated", False)),
                                truncation_index=data.get("truncation_index"))


def eval_log_modulus(S: LogPowerSeries, log_t: float, theta: float) -> float:
    """log |S(z)| at z = exp(log_t + i theta), factoring out the dominant term.

    Terms more than 40 log-units under the peak are dropped.  Raises
    :class:`NearZeroModulus` when the scaled sum cancels below 1e-12.
    """
    if len(S) == 0:
        raise ValueError("empty series")
    logmod, _, status = S.log_modulus([log_t], [theta])
    if status[0]:
        raise NearZeroModulus(log_t, theta, exact_zero=bool(status[0] == 2))
    return float(logmod[0])


def max_modulus_estimate(S: LogPowerSeries, log_t: float, n_phases: int) -> float:
    """max over theta in {2 pi j / n_phases} of log |S(t e^{i theta})|.

    Positive coefficients put the true maximum at theta = 0; the sweep is kept
    as a self-test and the theta = 0 value is returned.
    """
    if n_phases < 1:
        raise ValueError("n_phases must be >= 1")
    theta = 2.0 * np.pi * np.arange(n_phases) / n_phases
    logmod, _, status = S.log_modulus(np.full(n_phases, float(log_t)), theta)
    if status[0]:
        raise NearZeroModulus(log_t, 0.0, exact_zero=True)
    at_zero = float(logmod[0])
    sweep = float(logmod[status == 0].max())
    if sweep > at_zero + 1e-12 * max(1.0, abs(at_zero)):
        raise RuntimeError(
            f"phase sweep exceeded the positive-axis value ({sweep!r} > {at_zero!r})")
    return at_zero


def _check_truncation(series: Sequence[LogPowerSeries], X: np.ndarray, peak: np.ndarray,
                      cutoff: float) -> None:
    for S in series:
        if not S.truncated or len(S) == 0:
            continue
        last = S.log_coefficients[-1] + S.exponents[-1] * X
        gap = peak - last
        bad = np.nonzero(gap < cutoff)[0]
        if bad.size:
            i = int(bad[0])
            raise TruncationError(float(X[i]), float(gap[i]))


@dataclass
class EquivalenceCertificate:
    h: float
    c_low: float
    c_high: float
    grid: dict
    violations: list[dict]
    near_zero: int
    tol: float
    caveat: str = CERTIFICATE_CAVEAT

    @property
    def paper_bounds(self) -> dict:
        return {"low": LOG_HALF - self.h, "high": LOG_SIX}

    @property
    def passed(self) -> bool:
        return not self.violations

    def to_json(self) -> dict:
        return {"h": self.h, "c_low": self.c_low, "c_high": self.c_high,
                "paper_bounds": self.paper_bounds, "grid": self.grid,
                "violations": self.violations, "near_zero": self.near_zero,
                "tol": self.tol, "passed": self.passed, "caveat": self.caveat}


def log_sum_of_moduli(series: Sequence[LogPowerSeries], log_t, theta,
                      cutoff: float = CUTOFF):
    """log (sum_j |S_j|) on paired (log_t, theta) arrays, plus overall peak and
    the number of near-zero component evaluations."""
    X = np.atleast_1d(np.asarray(log_t, dtype=np.float64))
    TH = np.broadcast_to(np.asarray(theta, dtype=np.float64), X.shape)
    total = np.full(X.shape, -np.inf)
    peak = np.full(X.shape, -np.inf)
    near_zero = 0
    for S in series:
        lm, pk, st = S.log_modulus(X, TH, cutoff)
        near_zero += int(np.count_nonzero(st == 1))
        total = np.logaddexp(total, lm)
        peak = np.maximum(peak, pk)
    return total, peak, near_zero


def verify_equivalence(series: Sequence[LogPowerSeries], w: LogTransform, h: float,
                       grid, phases, *, tol: float = 1e-9, cutoff: float = CUTOFF,
                       max_violations: int = 100) -> EquivalenceCertificate:
    """Check log(1/2) - h + Phi <= log sum_D |G_D| <= log 6 + Phi on grid x phases."""
    grid = np.asarray(grid, dtype=np.float64)
    phases = np.asarray(phases, dtype=np.float64)
    X = np.repeat(grid, phases.size)
    TH = np.tile(phases, grid.size)
    L, peak, near_zero = log_sum_of_moduli(series, X, TH, cutoff)
    _check_truncation(series, X, peak, cutoff)
    diff = L - np.asarray(w.phi(X), dtype=np.float64)
    low, high = LOG_HALF - h, LOG_SIX
    bad = np.nonzero((diff < low - tol) | (diff > high + tol) | ~np.isfinite(diff))[0]
    violations = [{"x": float(X[i]), "theta": float(TH[i]), "lhs": float(diff[i]),
                   "low": low, "high": high,
                   "slack": float(min(diff[i] - low, high - diff[i]))}
                  for i in bad[:max_violations]]
    grid_info = {"x_min": float(grid.min()), "x_max": float(grid.max()),
                 "points": int(grid.size), "phases": int(phases.size),
                 "samples": int(X.size), "violations_total": int(bad.size)}
    return EquivalenceCertificate(float(h), float(np.min(diff)), float(np.max(diff)),
                                  grid_info, violations, near_zero, tol)


def plot_triples(series: Sequence[LogPowerSeries], w: LogTransform, grid) -> np.ndarray:
    """Rows (x, Phi(x), log sum |G_D(e^x)|) on the positive axis."""
    grid = np.asarray(grid, dtype=np.float64)
    L, _, _ = log_sum_of_moduli(series, grid, 0.0)
    return np.column_stack([grid, w.phi(grid), L])


# -- maps -------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Component:
    """f(z) = S(e^{i theta} z) for a positive-coefficient series S."""

    series: LogPowerSeries
    theta: float = 0.0
    label: str = ""

    def _polar(self, z):
        z = np.atleast_1d(np.asarray(z, dtype=np.complex128))
        with np.errstate(divide="ignore"):
            return np.log(np.abs(z)), np.angle(z) + self.theta

    def log_modulus(self, z):
        lt, ph = self._polar(z)
        logmod, _, status = self.series.log_modulus(lt, ph)
        return logmod, status

    def derivative_log_modulus(self, z):
        # |f'(z)| = |S'(e^{i theta} z)|
        lt, ph = self._polar(z)
        logmod, _, status = self.series.derivative().log_modulus(lt, ph)
        return logmod, status

    def __call__(self, z):
        z = np.asarray(z, dtype=np.complex128)
        return self.series(np.exp(1j * self.theta) * z)

    def derivative(self, z):
        z = np.asarray(z, dtype=np.complex128)
        return np.exp(1j * self.theta) * self.series.derivative()(np.exp(1j * self.theta) * z)


@dataclass(frozen=True)
class EvalResult:
    log_modulus_per_component: tuple[float, ...]
    log_sum_of_moduli: float
    dominant_exponent: int


@dataclass(frozen=True, eq=False)
class HoloMap:
    components: tuple[Component, ...]
    kind: str
    theta: float = 0.0
    base: tuple[LogPowerSeries, ...] | None = field(default=None, repr=False)

    def __post_init__(self):
        if not 0.0 <= self.theta < 2.0 * math.pi:
            raise ValueError("rotation phase must lie in [0, 2 pi)")
        expected = {"immersion": 3, "embedding": 4}.get(self.kind)
        if expected is not None and len(self.components) != expected:
            raise ValueError(f"{self.kind} needs {expected} components")

    @property
    def arity(self) -> int:
        return len(self.components)

    def __call__(self, z) -> np.ndarray:
        """Component values, shape (arity, ...)."""
        return np.stack([c(z) for c in self.components])

    def derivative(self, z) -> np.ndarray:
        return np.stack([c.derivative(z) for c in self.components])

    def log_sum_of_moduli(self, log_t, theta):
        X = np.atleast_1d(np.asarray(log_t, dtype=np.float64))
        TH = np.broadcast_to(np.asarray(theta, dtype=np.float64), X.shape)
        total = np.full(X.shape, -np.inf)
        for c in self.components:
            lm, _, _ = c.series.log_modulus(X, TH + c.theta)
            total = np.logaddexp(total, lm)
        return total

    def evaluate(self, log_t: float, theta: float) -> EvalResult:
        """Per-component log moduli at z = exp(log_t + i theta); near-zero
        components contribute -inf."""
        mods, best, dom = [], -math.inf, 0
        for c in self.components:
            lm, pk, _ = c.series.log_modulus([log_t], [theta + c.theta])
            mods.append(float(lm[0]))
            if len(c.series) and pk[0] > best:
                best = float(pk[0])
                dom = int(c.series.exponents[np.argmax(c.series.term_values(log_t)[0])])
        total = -math.inf
        for v in mods:
            total = float(np.logaddexp(total, v))
        return EvalResult(tuple(mods), total, dom)

    def to_json(self) -> dict:
        return {"kind": self.kind, "arity": self.arity, "theta": self.theta,
                "components": [{"label": c.label, "theta": c.theta, **c.series.to_json()}
                               for c in self.components]}


def _nonvanishing(statuses: Sequence[np.ndarray]) -> np.ndarray:
    ok = np.zeros(statuses[0].shape, dtype=bool)
    for st in statuses:
        ok |= st == 0
    return ok


def assemble_immersion(g: Sequence[LogPowerSeries], theta_grid: int = 1024,
                       check_grid=None) -> HoloMap:
    """(g_1, g_2, e^{i theta} z + g_3(e^{i theta} z)) with the first theta on
    ``theta_grid`` equally spaced values for which neither the map nor its
    derivative vanishes at any check point."""
    g1, g2, g3 = g
    if len(g1) == 0 or g1.exponents[0] != 0:
        raise ValueError("g_1 must carry the constant term (w(0) > 0)")
    if len(g3) and g3.exponents[0] < 2:
        raise ValueError("g_3 must start at exponent >= 2 so that g_3'(0) = 0")
    z = np.zeros(1, dtype=np.complex128) if check_grid is None else \
        np.atleast_1d(np.asarray(check_grid, dtype=np.complex128))
    f1, f2 = Component(g1, label="g1"), Component(g2, label="g2")
    s3 = g3.with_identity()
    fixed = [f1.log_modulus(z)[1], f2.log_modulus(z)[1]]
    fixed_d = [f1.derivative_log_modulus(z)[1], f2.derivative_log_modulus(z)[1]]
    for j in range(theta_grid):
        theta = 2.0 * math.pi * j / theta_grid
        f3 = Component(s3, theta, label="z+g3")
        if (np.all(_nonvanishing(fixed + [f3.log_modulus(z)[1]]))
                and np.all(_nonvanishing(fixed_d + [f3.derivative_log_modulus(z)[1]]))):
            return HoloMap((f1, f2, f3), "immersion", theta, base=(g1, g2, g3))
    raise ImmersionSearchError(
        f"no rotation among {theta_grid} candidates passed the check grid; use a denser theta grid")


def assemble_embedding(source, mode: str = "g_triple") -> HoloMap:
    """Append the identity coordinate z.

    ``mode="g_triple"`` appends z to the raw series triple (g_1, g_2, g_3);
    ``mode="immersion"`` appends it to the rotated immersion components.
    """
    identity = Component(LogPowerSeries.from_entries([(1, 0.0)]), label="z")
    if isinstance(source, HoloMap):
        if mode == "immersion":
            return HoloMap(tuple(source.components) + (identity,), "embedding",
                           source.theta, base=source.base)
        if source.base is None:
            raise ValueError("map does not carry its series triple")
        triple = source.base
    else:
        triple = tuple(source)
    if len(triple) != 3:
        raise ValueError("embedding needs three series")
    comps = tuple(Component(S, label=f"g{i + 1}") for i, S in enumerate(triple))
    return HoloMap(comps + (identity,), "embedding", 0.0, base=tuple(triple))


@dataclass
class MapEquivalence:
    c_low: float
    c_high: float
    norm: str
    samples: int


def map_equivalence(fmap: HoloMap, w: LogTransform, grid, phases) -> MapEquivalence:
    """Extremal constants of log(sum_j |f_j|) - Phi over grid x phases."""
    grid = np.asarray(grid, dtype=np.float64)
    phases = np.asarray(phases, dtype=np.float64)
    X = np.repeat(grid, phases.size)
    TH = np.tile(phases, grid.size)
    d = fmap.log_sum_of_moduli(X, TH) - np.asarray(w.phi(X))
    return MapEquivalence(float(d.min()), float(d.max()), "l1", int(X.size))


# -- harmonic transforms ------------------------------------------------------

def harmonic_square_series(T: TropicalSeries) -> TropicalSeries:
    """(k, b) -> (2k, 2b): the log-transform of the squared weight, even powers only."""
    return _map_terms(T, lambda n, b: (2 * n, 2.0 * b))


def harmonic_halve_series(T: TropicalSeries) -> TropicalSeries:
    """Inverse of :func:`harmonic_square_series`."""
    def f(n, b):
        if n % 2:
            raise ValueError("halving needs even slopes")
        return n // 2, 0.5 * b
    return _map_terms(T, f)


def _map_terms(T: TropicalSeries, f: Callable) -> TropicalSeries:
    # positive scaling of slopes and intercepts keeps every term essential
    if not T.is_lazy:
        pairs = [f(int(n), float(b)) for n, b in zip(T.slopes, T.intercepts)]
        return TropicalSeries._from_filtered([p[0] for p in pairs], [p[1] for p in pairs])

    def gen():
        i = 0
        while T.has_term(i):
            t = T.term(i)
            yield f(t.slope, t.intercept)
            i += 1

    return TropicalSeries.lazy(gen(), infinite=T._infinite)


@dataclass(frozen=True)
class HarmonicComponent:
    component: Component
    part: str  # "re" | "im"

    def __call__(self, z):
        v = self.component(z)
        return np.real(v) if self.part == "re" else np.imag(v)

    @property
    def label(self) -> str:
        return f"{'Re' if self.part == 're' else 'Im'} {self.component.label}"


def harmonic_components(fmap: HoloMap) -> list[HarmonicComponent]:
    """(Re f_1, Im f_1, ..., Re f_n, Im f_n): a harmonic map with |h| = |f|."""
    if fmap.arity < 1:
        raise ValueError("map has no components")
    out = []
    for c in fmap.components:
        out.append(HarmonicComponent(c, "re"))
        out.append(HarmonicComponent(c, "im"))
    return out
