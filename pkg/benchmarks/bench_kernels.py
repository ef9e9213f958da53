"""Timing comparison of the compiled and pure-Python trial kernels.

Runs matched blocks through both implementations and reports per-trial
cost and speedup.  Error counts are asserted equal on the way, so a
benchmark run doubles as an equivalence smoke test.

Usage: python benchmarks/bench_kernels.py [--trials N]
"""

import argparse
import math
import time

from cohrx._core import pykernels
from cohrx.analytic import sh_optimal_theta

try:
    from cohrx._core import ckernels
except ImportError:
    ckernels = None

IDEAL = (1.0, 0.0, 0.0, 0.0, math.inf)
APD = (0.5, 250.0, 50e-9, 0.01, 1e7)


def cases(trials):
    c0 = math.exp(-0.5)
    theta = sh_optimal_theta(0.5, 0.5, c0)
    yield "kennedy ideal", "run_kennedy", (1, 0, trials, 0.5, 1.0, 1.0, *IDEAL)
    yield "kennedy apd 1ms", "run_kennedy", (2, 0, trials, 0.5, 1.0, 1e-3, *APD)
    yield "sh ideal", "run_sh", (3, 0, trials, 0.5, theta, c0, 1.0, 1.0, *IDEAL)
    yield "sh apd 1ms", "run_sh", (4, 0, trials, 0.5, theta, c0, 1.0, 1e-3, *APD)
    yield "dolinar ideal", "run_dolinar", (
        5, 0, trials, 0.5, 0.5, 1.0, 1.0, *IDEAL, 0.0, 0.0, None, 1.0,
    )
    yield "dolinar apd 1ms", "run_dolinar", (
        6, 0, trials, 0.5, 0.5, 1.0, 1e-3, *APD, 100e-9, 0.0, None, 1.0,
    )


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--trials", type=int, default=20_000)
    args = parser.parse_args()

    if ckernels is None:
        print("compiled kernels not built; nothing to compare")
        return

    print(f"{args.trials} trials per case, per-trial cost in microseconds")
    print(f"{'case':<18} {'python':>9} {'compiled':>9} {'speedup':>8}")
    for label, name, kargs in cases(args.trials):
        t0 = time.perf_counter()
        e_py = getattr(pykernels, name)(*kargs)
        t_py = time.perf_counter() - t0
        t0 = time.perf_counter()
        e_cy = getattr(ckernels, name)(*kargs)
        t_cy = time.perf_counter() - t0
        assert e_py == e_cy, f"{label}: {e_py} != {e_cy}"
        us = 1e6 / args.trials
        print(f"{label:<18} {t_py * us:>8.2f} {t_cy * us:>8.2f} {t_py / t_cy:>7.1f}x")


if __name__ == "__main__":
    main()
