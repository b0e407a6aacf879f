"""Time the numba kernels against their pure-numpy counterparts.

Run ``python3 benchmarks/bench_kernels.py [--size 256] [--repeat 5]``. The
workload matches one TLD pass on a ``size x size`` image with 11x11 patches.
"""
import argparse
import time

import numpy as np

from mstld import kernels
from mstld._accel import HAVE_NUMBA
from mstld.tld import dct_transform


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--size", type=int, default=256)
    ap.add_argument("--patch", type=int, default=11)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    if not HAVE_NUMBA:
        raise SystemExit("numba unavailable (or MSTLD_DISABLE_NUMBA is set): nothing to compare")

    rng = np.random.default_rng(0)
    p, n = args.patch, args.patch ** 2
    count = (args.size - p + 1) ** 2
    W = dct_transform(p)
    Y = rng.normal(scale=30.0, size=(n, count))
    Z = W @ Y
    winv = np.linalg.inv(W)
    bound = n * 1.04 ** 2 * 25.0 ** 2
    cases = {
        "threshold_columns": lambda b: kernels.threshold_columns(Z, round(n / 10), backend=b),
        "grow_supports": lambda b: kernels.grow_supports(Z, winv, Y, bound, backend=b),
        "aggregate": lambda b: kernels.aggregate(Y, args.size, args.size, p, backend=b),
    }
    print(f"{count} patches of {p}x{p}, best of {args.repeat}")
    print(f"{'kernel':<20}{'numba s':>10}{'numpy s':>10}{'speedup':>9}")
    for name, fn in cases.items():
        fn("numba")  # compile outside the timed region
        a = best_of(lambda: fn("numba"), args.repeat)
        b = best_of(lambda: fn("numpy"), args.repeat)
        print(f"{name:<20}{a:>10.4f}{b:>10.4f}{b / a:>8.1f}x")


if __name__ == "__main__":
    main()
