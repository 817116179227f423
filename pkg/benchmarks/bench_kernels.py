"""Compare the compiled kernels with the numpy fallback.

Usage::

    python benchmarks/bench_kernels.py [--repeat 5]

Prints the median wall time of each kernel for both backends, the speed-up,
and the largest difference between their outputs.
"""
from __future__ import annotations

import argparse
import statistics
import time

import numpy as np

from sphere_bubbling import _pykernels
from sphere_bubbling.spectral import _mu, _p0, jacobi_nodes

try:
    from sphere_bubbling import _ckernels
except ImportError:  # pragma: no cover
    _ckernels = None


def _time(fn, repeat):
    ts = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        ts.append(time.perf_counter() - t0)
    return statistics.median(ts), out


def cases(n=4, L=400):
    t, w = jacobi_nodes(n, 2 * L + 64)
    t = np.ascontiguousarray(t)
    rng = np.random.default_rng(0)
    coeffs = np.ascontiguousarray(rng.standard_normal(L + 1) / (1 + np.arange(L + 1)) ** 2)
    big = np.ascontiguousarray(rng.standard_normal(1 << 20))
    wts = np.ascontiguousarray(rng.random(1 << 20))
    mu, p0 = _mu(n), _p0(n)
    return {
        "weighted_sum (2^20)": lambda k: k.weighted_sum(big, wts),
        f"gegenbauer_table (L={L})": lambda k: np.asarray(k.gegenbauer_table(t, L, mu, p0)),
        f"zonal_synthesis (L={L})": lambda k: np.asarray(k.zonal_synthesis(coeffs, t, mu, p0)),
    }


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    if _ckernels is None:
        print("compiled kernels not available; only the fallback can be timed")
    print(f"{'kernel':28s} {'python [ms]':>12s} {'cython [ms]':>12s} {'speed-up':>9s} {'max diff':>10s}")
    for name, fn in cases().items():
        tp, outp = _time(lambda: fn(_pykernels), args.repeat)
        if _ckernels is None:
            print(f"{name:28s} {1e3 * tp:12.3f}")
            continue
        tc, outc = _time(lambda: fn(_ckernels), args.repeat)
        diff = float(np.max(np.abs(np.asarray(outp) - np.asarray(outc))))
        print(f"{name:28s} {1e3 * tp:12.3f} {1e3 * tc:12.3f} {tp / tc:9.2f} {diff:10.2e}")


if __name__ == "__main__":
    main()
