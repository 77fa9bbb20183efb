"""Compare the compiled sweep kernel with the numpy fallback.

Usage: python3 benchmarks/bench_kernels.py [--repeat N]

Both backends are run on the same cumulative tables and the maxima are
checked for agreement before timings are reported.
"""

import argparse
import time

import numpy as np

from strongrhi import kernels
from strongrhi.generators import make_measure, make_weight
from strongrhi.measure import AxisGrid, cumulative

CASES = [(1, 16), (1, 64), (1, 256), (2, 8), (2, 16), (2, 24)]


def tables(dim, k, seed=0):
    grid = AxisGrid(tuple(np.linspace(0.0, 1.0, k + 1) for _ in range(dim)))
    mu = make_measure("random-density", grid, {"B": 3.0}, seed=seed)
    w = make_weight("random-log-bounded-weight", grid, {"B": 4.0}, seed=seed + 1)
    return cumulative(w.values * mu.masses), cumulative(mu.masses), mu.null_threshold()


def best_time(fn, repeat):
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)
    if kernels._compiled is None:
        print("compiled backend unavailable; only the numpy fallback can run")
    print(f"{'case':>10} {'numpy [s]':>12} {'compiled [s]':>13} {'speedup':>9}")
    for dim, k in CASES:
        cf, cm, null = tables(dim, k)
        t_py, ref = best_time(lambda: kernels.sweep_max(cf, cm, null, backend="python"), args.repeat)
        if kernels._compiled is None:
            print(f"{dim}D {k:>5}^{dim} {t_py:12.4g} {'-':>13} {'-':>9}")
            continue
        t_c, out = best_time(lambda: kernels.sweep_max(cf, cm, null, backend="compiled"), args.repeat)
        for a, b in zip(ref, out):
            np.testing.assert_allclose(a, b, rtol=1e-12, atol=0)
        print(f"{dim}D {k:>5}^{dim} {t_py:12.4g} {t_c:13.4g} {t_py / t_c:9.1f}")


if __name__ == "__main__":
    main()
