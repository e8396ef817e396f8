"""Compare the compiled kernels against the numpy fallback.

    python benchmarks/bench_kernels.py [--repeat N] [--sizes 500,1000,2000]

Prints one row per kernel and size with the best-of-N wall time of each
backend, their speed ratio and whether the outputs agree.
"""
import argparse
import sys
import time

import numpy as np

from ipsae import _fallback

try:
    from ipsae import _kernels
except ImportError:
    _kernels = None


def best_time(fn, repeat):
    best = float("inf")
    for _ in range(repeat):
        start = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - start)
    return best, out


def gauss_case(n, rng):
    M = rng.standard_normal((n, n)) + n ** 0.5 * np.eye(n)
    rhs = rng.standard_normal((n, 1))
    return f"gauss_solve n={n}", (M, rhs), lambda mod, a: mod.gauss_solve(*a), \
        lambda a, b: float(np.abs(a - b).max())


def silhouette_case(q, rng):
    pts = np.ascontiguousarray(rng.standard_normal((q, 16)))
    labels = rng.integers(0, 10, q).astype(np.int64)
    return f"silhouette q={q}", (pts, labels, 10), lambda mod, a: mod.silhouette_samples(*a), \
        lambda a, b: float(np.abs(a - b).max())


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=3)
    parser.add_argument("--sizes", default="500,1000,2000", help="silhouette sample counts")
    parser.add_argument("--solve-sizes", default="100,400", help="linear system orders")
    args = parser.parse_args(argv)
    if _kernels is None:
        print("compiled extension not built; nothing to compare", file=sys.stderr)
        return 1

    rng = np.random.default_rng(0)
    cases = [gauss_case(int(n), rng) for n in args.solve_sizes.split(",")]
    cases += [silhouette_case(int(q), rng) for q in args.sizes.split(",")]
    print(f"{'kernel':<22}{'cython s':>12}{'numpy s':>12}{'speedup':>10}{'max|diff|':>12}")
    for name, inputs, call, diff in cases:
        t_c, out_c = best_time(lambda: call(_kernels, inputs), args.repeat)
        t_p, out_p = best_time(lambda: call(_fallback, inputs), args.repeat)
        print(f"{name:<22}{t_c:>12.4f}{t_p:>12.4f}{t_p / t_c:>9.1f}x{diff(out_c, out_p):>12.1e}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
