"""Time the numba kernels against the pure-numpy fallback.

    python benchmarks/bench_kernels.py [--points N] [--lines K] [--repeat R]
"""

import argparse
import time

import numpy as np

from logtrop._kernels import numba_impl, numpy_impl


def make_chain(rng, K):
    slopes = np.concatenate([[0.0], np.cumsum(rng.integers(1, 20, K - 1)).astype(np.float64)])
    bps = np.sort(rng.uniform(0, 100, K - 1))
    intercepts = np.concatenate([[0.0], -np.cumsum(np.diff(slopes) * bps)])
    return slopes, intercepts, bps


def best_of(fn, repeat):
    fn()  # warm-up (triggers compilation for numba)
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--points", type=int, default=200_000)
    ap.add_argument("--lines", type=int, default=64)
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    rng = np.random.default_rng(args.seed)
    s, b, bp = make_chain(rng, args.lines)
    xs = rng.uniform(bp[0], bp[-1], args.points)
    seg = np.searchsorted(bp, xs, side="left")
    theta = rng.uniform(0, 2 * np.pi, args.points)
    exps = s[::3].astype(np.int64)
    logc = b[::3]

    cases = {
        "envelope_eval": lambda impl: impl.envelope_eval(s, b, bp, xs),
        "far_lse": lambda impl: impl.far_lse(s, b, xs, seg, 40.0, False),
        "series_log_modulus": lambda impl: impl.series_log_modulus(exps, logc, xs, theta,
                                                                   40.0, 1e-12),
    }
    print(f"{args.points} points, {args.lines} lines, best of {args.repeat}")
    print(f"{'kernel':<20}{'numpy [ms]':>12}{'numba [ms]':>12}{'speedup':>10}")
    for name, case in cases.items():
        a = case(numpy_impl)
        c = case(numba_impl)
        for u, v in zip(a, c):
            np.testing.assert_allclose(u, v, rtol=1e-12, atol=1e-12)
        t_np = best_of(lambda: case(numpy_impl), args.repeat)
        t_nb = best_of(lambda: case(numba_impl), args.repeat)
        print(f"{name:<20}{1e3 * t_np:>12.2f}{1e3 * t_nb:>12.2f}{t_np / t_nb:>9.1f}x")


if __name__ == "__main__":
    main()
