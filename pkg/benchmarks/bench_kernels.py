"""Time every alpha kernel under the numba and numpy backends.

Usage::

    python3 benchmarks/bench_kernels.py [--dates 800] [--tickers 2000] [--window 10] [--repeat 3]

The numba timings exclude compilation (one warm-up call per kernel).  The
last section times the whole starter library through ``evaluate_library``,
which uses whichever backend ``GATEDALPHA_NUMBA`` selects.
"""

import argparse
import time

import numpy as np

from gatedalpha import _accel
from gatedalpha.alpha import evaluate_library, kernels, starter_library
from gatedalpha.panel import generate_synthetic


def best_time(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main():
    ap = argparse.ArgumentParser(description=__doc__.split("\n\n")[0])
    ap.add_argument("--dates", type=int, default=800)
    ap.add_argument("--tickers", type=int, default=2000)
    ap.add_argument("--window", type=int, default=10)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()

    rng = np.random.default_rng(0)
    x = rng.normal(size=(args.dates, args.tickers))
    x[rng.random(x.shape) < 0.01] = np.nan
    y = rng.normal(size=x.shape)
    groups = rng.integers(0, 10, args.tickers)
    w = args.window

    backends = ["numpy"] + (["numba"] if _accel.HAVE_NUMBA else [])
    calls = {}
    for name in kernels.TS_KERNELS:
        calls[name] = lambda k, n=name: getattr(k, n)(x, w)
    for name in kernels.PAIR_KERNELS:
        calls[name] = lambda k, n=name: getattr(k, n)(x, y, w)
    calls["rank_rows"] = lambda k: k.rank_rows(x)
    calls["scale_rows"] = lambda k: k.scale_rows(x, 1.0)
    calls["group_demean"] = lambda k: k.group_demean(x, groups)

    print(f"{args.dates} dates x {args.tickers} tickers, window {w}, best of {args.repeat}")
    print(f"{'kernel':14s}" + "".join(f"{b:>12s}" for b in backends) + ("     speedup" if len(backends) == 2 else ""))
    for name, call in calls.items():
        row = []
        for b in backends:
            k = kernels.backend(b)
            call(k)  # warm-up (and numba compilation)
            row.append(best_time(lambda: call(k), args.repeat))
        line = f"{name:14s}" + "".join(f"{t * 1e3:10.1f}ms" for t in row)
        if len(row) == 2:
            line += f"{row[0] / row[1]:11.1f}x"
        print(line)

    panel = generate_synthetic(min(args.tickers, 500), args.dates, seed=1)
    lib = starter_library()
    evaluate_library(lib, panel)
    t = best_time(lambda: evaluate_library(lib, panel), args.repeat)
    print(f"\nstarter library ({len(lib)} alphas, {panel.shape[1]} tickers) with backend "
          f"{_accel.backend_name()}: {t:.2f} s")


if __name__ == "__main__":
    main()
