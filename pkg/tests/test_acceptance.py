"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v`` (lines are repeated in the
terminal summary) or directly as a script.
"""

import itertools
import json
import math
import random
import time

import numpy as np
import pytest

from logtrop.holomap import (LOG_HALF, LOG_SIX, assemble_immersion, harmonic_components,
                             harmonic_halve_series, harmonic_square_series, log_sum_of_moduli)
from logtrop.thinning import split, thin, verify_chain_bounds
from logtrop.tropical import (TropicalSeries, essential_filter, monomial_minorant,
                              tangent_gaps)
from logtrop.weights import make_weight

RESULTS: dict[int, str] = {}
REFERENCE = ("exp_power:beta=1", "log_power:alpha=2.5")


def report(n: int, ok: bool, detail: str) -> None:
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {n}: {detail}"
    RESULTS[n] = line
    print(line)


def reference_chain(spec):
    w = make_weight(spec)
    return w, thin(monomial_minorant(w), 4.0, 64)


def parabola():
    return TropicalSeries.lazy((k, -float(k * k)) for k in itertools.count())


def brute_thin(terms, h, k_max):
    """Independent selection rule over an explicit term list."""
    chain, xs = [0], []
    while len(chain) < k_max:
        n0, b0 = terms[chain[-1]]
        s, pick = 1, None
        while chain[-1] + s < len(terms):
            n1, b1 = terms[chain[-1] + s]
            xi = (b0 - b1) / (n1 - n0)
            if b0 + n0 * xi > max(b + n * xi for n, b in terms) - h:
                pick = (chain[-1] + s, xi)
                s += 1
            else:
                break
        chain.append(pick[0])
        xs.append(pick[1])
    return chain, xs


def test_criterion_1_tangent_gap_closed_form():
    t0 = time.perf_counter()
    gaps = tangent_gaps(make_weight("log_power:alpha=2"), range(2, 201))
    elapsed = time.perf_counter() - t0
    n = np.array([g.n for g in gaps], dtype=float)
    # exact tangent algebra for Phi = x^2: c_n = -n^2/4
    d = (2 * n + 1) / 4
    oracle = d ** 2 - (-n ** 2 / 4 + n * d)
    h = np.array([g.h_n for g in gaps])
    err = float(np.max(np.abs(h - 1 / 16)))
    ok = (len(gaps) == 199 and err <= 1e-9 and np.allclose(oracle, 1 / 16, atol=1e-15)
          and np.allclose([g.a_n for g in gaps], n / 2, atol=1e-12)
          and np.allclose([g.d_n for g in gaps], d, atol=1e-12) and elapsed < 1.0)
    report(1, ok, f"max |h_n - 1/16| = {err:.2e} over n=2..200 in {elapsed:.3f}s")
    assert ok


def test_criterion_2_divergence_regime():
    t0 = time.perf_counter()
    gaps = tangent_gaps(make_weight("log_power:alpha=1.5"), range(10, 201))
    elapsed = time.perf_counter() - t0
    h = np.array([g.h_n for g in gaps])
    n = np.array([g.n for g in gaps], dtype=float)
    # closed form for Phi = x^1.5: c_n = -(4/27) n^3
    c = lambda k: -(4.0 / 27.0) * k ** 3
    d = c(n) - c(n + 1)
    oracle = d ** 1.5 - (c(n) + n * d)
    ok = (len(gaps) == 191 and bool(np.all(np.diff(h) > 0)) and h[-1] > 10 * h[0]
          and np.allclose(h, oracle, rtol=1e-9) and elapsed < 5.0)
    report(2, ok, f"h_10 = {h[0]:.4f}, h_200 = {h[-1]:.4f} (ratio {h[-1] / h[0]:.2f}), "
                  f"strictly increasing, {elapsed:.3f}s")
    assert ok


def test_criterion_3_minorant_closed_form():
    w = make_weight("exp_power:beta=1")
    T = monomial_minorant(w)
    k = np.arange(1, 51)
    T.ensure(51)
    b = np.array([T.term(int(i)).intercept for i in k])
    err_b = float(np.max(np.abs(b - (k - k * np.log(k)))))
    m = np.arange(1, 21)
    env = np.array([T(math.log(v)) for v in m])
    err_env = float(np.max(np.abs(env - m)))
    # brute force: max over k <= 50 of closed-form lines
    kk = np.arange(0, 51)
    bb = np.where(kk == 0, 0.0, kk - kk * np.log(np.maximum(kk, 1)))
    brute = np.max(bb[None, :] + kk[None, :] * np.log(m)[:, None], axis=1)
    err_brute = float(np.max(np.abs(brute - env)))
    ok = T.term(0).intercept == pytest.approx(0.0, abs=1e-9) and max(err_b, err_env, err_brute) <= 1e-9
    report(3, ok, f"max intercept error {err_b:.2e}, envelope error {err_env:.2e}, "
                  f"brute-force disagreement {err_brute:.2e}")
    assert ok


def test_criterion_4_thinning_oracle():
    k_max = 64
    chain = thin(parabola(), 4.0, k_max)
    terms = [(k, -float(k * k)) for k in range(3 * k_max + 8)]
    idx, xs = brute_thin(terms, 4.0, k_max)
    slopes_ok = chain.slopes.tolist() == [3 * k for k in range(k_max)]
    bps_ok = chain.breakpoints.tolist() == [6.0 * k - 3.0 for k in range(1, k_max)]
    brute_ok = chain.source_index.tolist() == idx and chain.breakpoints.tolist() == xs
    ok = slopes_ok and bps_ok and brute_ok
    report(4, ok, f"{k_max} slopes 0,3,...,{3 * (k_max - 1)}; x_k = 6k-3 exact; "
                  f"brute-force match {brute_ok}")
    assert ok


def test_criterion_5_chain_inequalities():
    t0 = time.perf_counter()
    parts = []
    ok = True
    for spec in REFERENCE:
        w, chain = reference_chain(spec)
        grid = np.linspace(w.x_floor, chain.breakpoints[-1], 10**4)
        rep = verify_chain_bounds(chain, w, grid)
        slack = min(rep.below.min_slack, rep.sandwich.min_slack, rep.tail.min_slack)
        ok &= slack >= -1e-12 and rep.below.checked > 0 and rep.tail.checked == grid.size
        parts.append(f"{spec} min slack (i) {rep.below.min_slack:.2e} (ii) "
                     f"{rep.sandwich.min_slack:.2e} (iii) {rep.tail.min_slack:.2f}")
    elapsed = time.perf_counter() - t0
    ok &= elapsed < 10.0
    report(5, ok, "; ".join(parts) + f"; {elapsed:.2f}s")
    assert ok


def test_criterion_6_main_bound():
    t0 = time.perf_counter()
    rng = np.random.default_rng(6)
    low, high = LOG_HALF - 4.0 - 1e-9, LOG_SIX + 1e-9
    parts = []
    ok = True
    for spec in REFERENCE:
        w, chain = reference_chain(spec)
        G = split(chain)
        hi = min(chain.breakpoints[-1], chain.certified_upper())
        grid = np.linspace(w.x_floor, hi, 1000)
        phases = rng.uniform(0, 2 * np.pi, 64)
        X, TH = np.repeat(grid, 64), np.tile(phases, 1000)
        L, _, _ = log_sum_of_moduli(G, X, TH)
        diff = L - w.phi(X)
        inside = bool(np.all((diff >= low) & (diff <= high)))
        ok &= inside and X.size == 64000
        parts.append(f"{spec} range [{diff.min():.4f}, {diff.max():.2e}] over "
                     f"[{grid[0]:.2f}, {grid[-1]:.2f}]")
    elapsed = time.perf_counter() - t0
    ok &= elapsed < 30.0
    report(6, ok, "; ".join(parts) + f"; bounds [{low:.4f}, {high:.4f}]; {elapsed:.2f}s")
    assert ok


def test_criterion_7_harmonic_identity():
    rng = np.random.default_rng(7)
    T = essential_filter([(k, -k ** 1.5) for k in range(40)])
    rt = harmonic_halve_series(harmonic_square_series(T))
    round_trip = rt.slopes.tolist() == T.slopes.tolist() and rt.intercepts.tolist() == T.intercepts.tolist()
    worst = 0.0
    finite = True
    for spec in REFERENCE:
        w, chain = reference_chain(spec)
        f = assemble_immersion(split(chain), 1024)
        # radii where |f|^2 stays representable: envelope below 300
        xs = np.linspace(w.x_floor, chain.breakpoints[-1], 100001)
        x_hi = float(xs[chain.envelope(xs) <= 300.0].max())
        z = np.exp(rng.uniform(w.x_floor - 3, x_hi, 1000)) * np.exp(1j * rng.uniform(0, 2 * np.pi, 1000))
        sq = sum(c(z) ** 2 for c in harmonic_components(f))
        ref = np.sum(np.abs(f(z)) ** 2, axis=0)
        finite &= bool(np.all(np.isfinite(sq)) and np.all(np.isfinite(ref)) and np.all(ref > 0))
        worst = max(worst, float(np.max(np.abs(sq - ref) / ref)))
    ok = round_trip and finite and worst <= 1e-12
    report(7, ok, f"doubling round trip exact: {round_trip}; max relative norm gap {worst:.2e}")
    assert ok


def test_criterion_8_immersion_evidence():
    rng = np.random.default_rng(8)
    chain = thin(parabola(), 4.0, 16)
    G = split(chain)
    radius = chain.t[9]
    z = radius * np.sqrt(rng.uniform(0, 1, 1000)) * np.exp(1j * rng.uniform(0, 2 * np.pi, 1000))
    f = assemble_immersion(G, 1024, z)
    ok_f = np.zeros(z.size, dtype=bool)
    ok_d = np.zeros(z.size, dtype=bool)
    for c in f.components:
        ok_f |= c.log_modulus(z)[1] == 0
        ok_d |= c.derivative_log_modulus(z)[1] == 0
    ok = bool(ok_f.all() and ok_d.all()) and 0 <= f.theta < 2 * math.pi
    report(8, ok, f"theta = {f.theta:.6f} accepted; {int(ok_f.sum())}/1000 nonzero values, "
                  f"{int(ok_d.sum())}/1000 nonzero derivatives in |z| <= t_10")
    assert ok


def test_criterion_9_structural_properties():
    rng = np.random.default_rng(9)
    checks = {}
    # minorant below Phi
    below = True
    for spec in ("exp_power:beta=1", "log_power:alpha=2.5", "log_power:alpha=1.5", "monomial:m=4"):
        w = make_weight(spec)
        T = monomial_minorant(w, range(0, 120))
        x = np.linspace(w.x_floor - 2, w.x_floor + 8, 5000)
        phi = w.phi(x)
        below &= bool(np.all(T(x) <= phi + 1e-12 * np.maximum(1, np.abs(phi))))
    checks["minorant<=Phi"] = below
    # idempotence
    w = make_weight("log_power:alpha=2.5")
    T = monomial_minorant(w, range(0, 60))
    T2 = monomial_minorant(make_weight({"family": "tropical", "terms": T.to_json()["terms"]}),
                           range(0, 60))
    checks["idempotence"] = (T2.slopes.tolist() == T.slopes.tolist()
                             and float(np.max(np.abs(T2.intercepts - T.intercepts))) <= 1e-12)
    # permutation invariance
    perm_ok = True
    for _ in range(50):
        raw = [(int(n), float(b)) for n, b in zip(rng.integers(0, 30, 25), rng.normal(0, 20, 25))]
        ref = essential_filter(raw)
        shuffled = list(raw)
        random.Random(int(rng.integers(1 << 30))).shuffle(shuffled)
        got = essential_filter(shuffled)
        perm_ok &= ref.to_json() == got.to_json()
    checks["permutation"] = perm_ok
    # chain determinism
    runs = [json.dumps(thin(monomial_minorant(make_weight("exp_power:beta=1")), 4.0, 64).to_json())
            for _ in range(2)]
    checks["determinism"] = runs[0] == runs[1]
    # derivative series vs finite differences
    f = assemble_immersion(split(thin(parabola(), 4.0, 12)), 64)
    worst = 0.0
    for z in rng.uniform(0.2, 3.0, 100) * np.exp(1j * rng.uniform(0, 2 * np.pi, 100)):
        dz = 1e-6 * max(1.0, abs(z))
        fd = (f(np.array([z + dz])) - f(np.array([z - dz])))[:, 0] / (2 * dz)
        an = f.derivative(np.array([z]))[:, 0]
        worst = max(worst, float(np.max(np.abs(an - fd)) / np.max(np.abs(an))))
    checks["derivative"] = worst <= 1e-5
    ok = all(checks.values())
    report(9, ok, ", ".join(f"{k} {'ok' if v else 'FAILED'}" for k, v in checks.items())
                  + f" (fd rel err {worst:.1e})")
    assert ok


if __name__ == "__main__":
    for name, fn in sorted(globals().items()):
        if name.startswith("test_criterion_"):
            try:
                fn()
            except AssertionError:
                pass
