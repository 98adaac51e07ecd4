"""Radial weights on the plane, represented through Phi(x) = log w(e^x).

Every catalog family is built by :func:`make_weight` from a :class:`WeightSpec`.
The callables on :class:`LogTransform` accept floats or numpy arrays.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Any, Callable, Mapping, Sequence

import numpy as np
from scipy.special import expit, logit

FD_STEP = 1e-5
CONVEXITY_TOL = 1e-9

FAMILIES = ("monomial", "exp_power", "log_power", "tropical", "table")


class WeightSpecError(ValueError):
    """Raised for invalid weight parameters or malformed specs."""


def _central_difference(f: Callable, step: float = FD_STEP) -> Callable:
    def df(x):
        x = np.asarray(x, dtype=np.float64)
        return (f(x + step) - f(x - step)) / (2.0 * step)
    return df


def _scalar_or_array(values, like):
    if np.ndim(like) == 0:
        return float(values)
    return values


@dataclass(frozen=True)
class LogTransform:
    """Oracle for Phi(x) = log w(e^x) and its first two derivatives.

    Below ``x_floor`` the transform is the constant ``phi(x_floor)`` and both
    derivatives vanish; at ``x_floor`` itself the derivatives are the
    right-hand ones.  ``dphi_inverse(u)`` returns a point where ``u`` is a
    subgradient of Phi, ``inf`` when the slope is only approached at
    +infinity and ``nan`` when it is never reached.
    """

    raw_phi: Callable
    x_floor: float
    raw_dphi: Callable | None = None
    raw_ddphi: Callable | None = None
    dphi_inverse: Callable | None = None
    sup_slope: float = math.inf
    sup_attained: bool = False
    name: str = "custom"
    spec: WeightSpec | None = field(default=None, compare=False)
    # envelope lines (slopes, intercepts) for piecewise-linear families
    lines: tuple | None = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if self.raw_dphi is None:
            object.__setattr__(self, "raw_dphi", _central_difference(self.raw_phi))
        if self.raw_ddphi is None:
            object.__setattr__(self, "raw_ddphi", _central_difference(self.raw_dphi))

    def phi(self, x):
        xa = np.maximum(np.asarray(x, dtype=np.float64), self.x_floor)
        return _scalar_or_array(self.raw_phi(xa), x)

    def dphi(self, x):
        xa = np.asarray(x, dtype=np.float64)
        vals = np.where(xa < self.x_floor, 0.0,
                        self.raw_dphi(np.maximum(xa, self.x_floor)))
        return _scalar_or_array(vals, x)

    def ddphi(self, x):
        xa = np.asarray(x, dtype=np.float64)
        vals = np.where(xa < self.x_floor, 0.0,
                        self.raw_ddphi(np.maximum(xa, self.x_floor)))
        return _scalar_or_array(vals, x)

    def omega_log(self, t):
        """log w(t); t = 0 maps to the floor value."""
        with np.errstate(divide="ignore"):
            return self.phi(np.log(t))

    @property
    def is_rapid_family(self) -> bool:
        return math.isinf(self.sup_slope)


@dataclass(frozen=True)
class WeightSpec:
    family: str
    params: Mapping[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise WeightSpecError(
                f"unknown weight family {self.family!r}; expected one of {FAMILIES}")

    @classmethod
    def from_json(cls, data: Mapping[str, Any] | str) -> WeightSpec:
        if isinstance(data, str):
            data = json.loads(data)
        data = dict(data)
        try:
            family = data.pop("family")
        except KeyError:
            raise WeightSpecError("weight spec needs a 'family' key") from None
        return cls(family, data)

    @classmethod
    def parse(cls, text: str) -> WeightSpec:
        """Parse ``family:key=value,key=value`` (e.g. ``log_power:alpha=2.5``)."""
        family, _, rest = text.partition(":")
        params: dict[str, Any] = {}
        for item in filter(None, rest.split(",")):
            key, eq, value = item.partition("=")
            if not eq:
                raise WeightSpecError(f"expected key=value in {item!r}")
            params[key.strip()] = float(value) if key.strip() != "m" else _as_int(value)
        return cls(family.strip(), params)

    def to_json(self) -> dict[str, Any]:
        return {"family": self.family, **self.params}


def _as_int(value) -> int:
    f = float(value)
    if f != int(f):
        raise WeightSpecError(f"expected an integer, got {value!r}")
    return int(f)


def _pl_subgradient_point(slopes: np.ndarray, breakpoints: np.ndarray,
                          x_floor: float) -> Callable:
    """dphi_inverse for an envelope of lines (slopes increasing)."""
    slopes = np.asarray(slopes, dtype=np.float64)
    breakpoints = np.asarray(breakpoints, dtype=np.float64)

    def inverse(u):
        ua = np.atleast_1d(np.asarray(u, dtype=np.float64))
        out = np.empty_like(ua)
        for i, v in enumerate(ua):
            if v > slopes[-1]:
                out[i] = math.nan
                continue
            j = int(np.searchsorted(slopes, v, side="left"))
            if slopes[j] == v:
                # any point of the active interval; prefer a finite endpoint
                if j < breakpoints.shape[0]:
                    out[i] = breakpoints[j]
                elif j > 0:
                    out[i] = breakpoints[j - 1]
                else:
                    out[i] = x_floor
            else:
                out[i] = breakpoints[j - 1] if j > 0 else x_floor
        return out[0] if np.ndim(u) == 0 else out

    return inverse


def _monomial(m: int) -> LogTransform:
    def phi(x):
        return np.logaddexp(0.0, m * x)

    def dphi(x):
        return m * expit(m * x)

    def ddphi(x):
        s = expit(m * x)
        return m * m * s * (1.0 - s)

    def inverse(u):
        u = np.asarray(u, dtype=np.float64)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = np.where(u < m, np.maximum(logit(u / m) / m, floor),
                           np.where(u == m, np.inf, np.nan))
        return _scalar_or_array(out, u)

    floor = -40.0 / m
    return LogTransform(phi, floor, dphi, ddphi, inverse,
                        sup_slope=float(m), sup_attained=False, name=f"monomial(m={m})")


def _exp_power(beta: float) -> LogTransform:
    def phi(x):
        return np.exp(beta * x)

    def dphi(x):
        return beta * np.exp(beta * x)

    def ddphi(x):
        return beta * beta * np.exp(beta * x)

    def inverse(u):
        u = np.asarray(u, dtype=np.float64)
        with np.errstate(divide="ignore"):
            out = np.log(u / beta) / beta
        return _scalar_or_array(out, u)

    # x_floor keeps phi(x_floor) = exp(-40), i.e. w(0) = 1 up to 4e-18
    floor = -40.0 / beta
    return LogTransform(phi, floor, dphi, ddphi,
                        lambda u: np.maximum(inverse(u), floor),
                        name=f"exp_power(beta={beta:g})")


def _log_power(alpha: float) -> LogTransform:
    # x^alpha for x >= 1, constant 1 below
    def phi(x):
        return np.power(x, alpha)

    def dphi(x):
        return alpha * np.power(x, alpha - 1.0)

    def ddphi(x):
        return alpha * (alpha - 1.0) * np.power(x, alpha - 2.0)

    def inverse(u):
        u = np.asarray(u, dtype=np.float64)
        out = np.maximum(1.0, np.power(u / alpha, 1.0 / (alpha - 1.0)))
        return _scalar_or_array(out, u)

    return LogTransform(phi, 1.0, dphi, ddphi, inverse, name=f"log_power(alpha={alpha:g})")


def _tropical(params: Mapping[str, Any]) -> LogTransform:
    from .tropical import TropicalSeries, TropicalTerm, essential_filter

    terms = params.get("terms")
    if isinstance(terms, TropicalSeries):
        series = terms
    else:
        if not terms:
            raise WeightSpecError("tropical weight needs a nonempty 'terms' list")
        raw = [t if isinstance(t, TropicalTerm) else
               TropicalTerm(_as_int(t["slope"]), float(t["intercept"])) for t in terms]
        series = essential_filter(raw)
    if series.is_lazy:
        raise WeightSpecError("tropical weights need a finite term list")
    slopes = series.slopes.astype(np.float64)
    if slopes[0] != 0:
        raise WeightSpecError(
            "tropical weight needs a slope-0 term (w(0) > 0); add (0, b)")
    bps = series.breakpoints
    floor = float(bps[0]) if bps.size else 0.0

    def phi(x):
        vals, _ = series.evaluate(np.atleast_1d(x))
        return vals if np.ndim(x) else vals[0]

    def dphi(x):
        _, idx = series.evaluate(np.atleast_1d(x))
        return slopes[idx] if np.ndim(x) else slopes[idx][0]

    def ddphi(x):
        return np.zeros_like(np.asarray(x, dtype=np.float64))

    return LogTransform(phi, floor, dphi, ddphi,
                        _pl_subgradient_point(slopes, bps, floor),
                        sup_slope=float(slopes[-1]), sup_attained=True,
                        name=f"tropical({len(slopes)} terms)",
                        lines=(slopes, series.intercepts.copy()))


def _table(params: Mapping[str, Any], strict: bool) -> LogTransform:
    samples = np.asarray(params.get("samples", ()), dtype=np.float64)
    if samples.ndim != 2 or samples.shape[1] != 2 or samples.shape[0] < 2:
        raise WeightSpecError("table weight needs at least two [x, phi] samples")
    xs, ys = samples[:, 0], samples[:, 1]
    if np.any(np.diff(xs) <= 0):
        raise WeightSpecError("table samples must be strictly increasing in x")
    piece_slopes = np.diff(ys) / np.diff(xs)
    if strict:
        if piece_slopes[0] < -CONVEXITY_TOL:
            raise WeightSpecError("table weight must be nondecreasing")
        bad = np.nonzero(np.diff(piece_slopes) < -CONVEXITY_TOL)[0]
        if bad.size:
            raise WeightSpecError(
                f"table samples are not convex near x = {xs[bad[0] + 1]:g}")

    def phi(x):
        x = np.asarray(x, dtype=np.float64)
        inner = np.interp(x, xs, ys)
        return np.where(x > xs[-1], ys[-1] + piece_slopes[-1] * (x - xs[-1]), inner)

    def dphi(x):
        x = np.asarray(x, dtype=np.float64)
        j = np.clip(np.searchsorted(xs, x, side="right") - 1, 0, piece_slopes.size - 1)
        return piece_slopes[j]

    def ddphi(x):
        return np.zeros_like(np.asarray(x, dtype=np.float64))

    inverse = None
    lines = None
    if strict:
        from .tropical import essential_lines
        ls, li, lb = essential_lines(
            np.concatenate([[0.0], piece_slopes]),
            np.concatenate([[ys[0]], ys[:-1] - piece_slopes * xs[:-1]]))
        inverse = _pl_subgradient_point(ls, lb, float(xs[0]))
        lines = (ls, li)
    return LogTransform(phi, float(xs[0]), dphi, ddphi, inverse,
                        sup_slope=float(max(piece_slopes[-1], 0.0)), sup_attained=True,
                        name=f"table({xs.size} samples)", lines=lines)


def make_weight(spec: WeightSpec | Mapping[str, Any] | str, *, strict: bool = True) -> LogTransform:
    """Build the log-transform oracle for a catalog weight.

    ``strict=False`` skips the convexity/monotonicity checks on tables so that
    :func:`check_convexity` can be exercised on bad data.
    """
    if isinstance(spec, str):
        spec = WeightSpec.parse(spec)
    elif not isinstance(spec, WeightSpec):
        spec = WeightSpec.from_json(spec)
    p = spec.params
    try:
        if spec.family == "monomial":
            m = _as_int(p["m"])
            if m < 1:
                raise WeightSpecError("monomial weight needs m >= 1")
            w = _monomial(m)
        elif spec.family == "exp_power":
            beta = float(p["beta"])
            if not beta > 0:
                raise WeightSpecError("exp_power weight needs beta > 0")
            w = _exp_power(beta)
        elif spec.family == "log_power":
            alpha = float(p["alpha"])
            if not alpha > 1:
                raise WeightSpecError(f"log_power weight needs alpha > 1, got {alpha:g}")
            w = _log_power(alpha)
        elif spec.family == "tropical":
            w = _tropical(p)
        else:
            w = _table(p, strict)
    except KeyError as exc:
        raise WeightSpecError(f"{spec.family} weight is missing parameter {exc}") from None
    return _with_spec(w, spec)


def _with_spec(w: LogTransform, spec: WeightSpec) -> LogTransform:
    object.__setattr__(w, "spec", spec)
    return w


def is_rapid(w: LogTransform, slope_threshold: float, x_max: float) -> bool:
    """Finite probe of rapid growth: Phi'(x_max) > slope_threshold."""
    if not slope_threshold > 0:
        raise ValueError("slope_threshold must be positive")
    with np.errstate(over="ignore"):
        return bool(w.dphi(float(x_max)) > slope_threshold)


@dataclass(frozen=True)
class ConvexityViolation:
    index: int
    x: tuple[float, float, float]
    excess: float


def check_convexity(w: LogTransform, grid: Sequence[float],
                    tol: float = CONVEXITY_TOL) -> list[ConvexityViolation]:
    """Consecutive grid triples where Phi lies above its chord.

    ``tol`` is scaled by ``max(1, |chord value|)``.
    """
    g = np.asarray(grid, dtype=np.float64)
    if g.size < 3 or np.any(np.diff(g) <= 0):
        raise ValueError("grid must be strictly increasing with at least 3 points")
    y = np.asarray(w.phi(g), dtype=np.float64)
    x0, x1, x2 = g[:-2], g[1:-1], g[2:]
    lam = (x2 - x1) / (x2 - x0)
    chord = lam * y[:-2] + (1.0 - lam) * y[2:]
    excess = y[1:-1] - chord
    bad = np.nonzero(excess > tol * np.maximum(1.0, np.abs(chord)))[0]
    return [ConvexityViolation(int(i), (float(x0[i]), float(x1[i]), float(x2[i])),
                               float(excess[i])) for i in bad]
