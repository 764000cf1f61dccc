"""Numba vs numpy timings for the hot kernels.

Usage: python3 benchmarks/bench_kernels.py [--repeat 5] [--csv out.csv]

Both implementations are called directly (the RKHS_LSQ_NUMBA flag only
picks the default), after one warm-up call so compile time is excluded.
Results are checked to agree before timing.
"""

import argparse
import csv
import sys
import time

import numpy as np

from rkhs_lsq import _kernels
from rkhs_lsq._accel import HAVE_NUMBA


def cases():
    rng = np.random.default_rng(0)
    x = np.ascontiguousarray(np.sort(rng.uniform(-1, 1, 20_000)))
    deg = 256
    w = np.ones(deg)
    s = 2.0
    top = 1 << 14
    sig2 = _kernels.legendre_sigma_sq(s, top)
    a, b = _kernels._recurrence(top)
    tol = np.full(4000, 1e-9)
    return {
        "legendre_table": (x[:4000], deg, a, b),
        "legendre_sq_sum": (x, 0, deg - 1, w, a, b),
        "legendre_tail": (x[:4000], 64, s, tol, top, sig2, a, b),
    }


def best_of(fn, args, repeat):
    fn(*args)
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        times.append(time.perf_counter() - t0)
    return min(times)


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5)
    parser.add_argument("--csv", default=None)
    args = parser.parse_args(argv)
    if not HAVE_NUMBA:
        print("numba is not installed; only the numpy path can run", file=sys.stderr)
        return 1
    rows = []
    for name, cargs in cases().items():
        nb, npy = _kernels.IMPLEMENTATIONS[name]
        a, b = nb(*cargs), npy(*cargs)
        a = a if isinstance(a, tuple) else (a,)
        b = b if isinstance(b, tuple) else (b,)
        for u, v in zip(a, b):
            np.testing.assert_allclose(u, v, rtol=1e-10, atol=1e-13)
        t_nb = best_of(nb, cargs, args.repeat)
        t_np = best_of(npy, cargs, args.repeat)
        rows.append({"kernel": name, "numba_s": t_nb, "numpy_s": t_np, "speedup": t_np / t_nb})
        print(f"{name:18s} numba {t_nb * 1e3:9.2f} ms   numpy {t_np * 1e3:9.2f} ms   x{t_np / t_nb:6.1f}")
    if args.csv:
        with open(args.csv, "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=list(rows[0]))
            w.writeheader()
            w.writerows(rows)
    return 0


if __name__ == "__main__":
    sys.exit(main())
