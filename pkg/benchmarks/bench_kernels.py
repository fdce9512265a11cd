"""Time the compiled and numpy order-statistic kernels on identical batches.

    python3 benchmarks/bench_kernels.py [--rows 2000] [--repeat 5]
"""
import argparse
import time

import numpy as np

from l0robust import kernels

CASES = [(4096, 0, 1), (4096, 0, 8), (4096, 8, 8), (4096, 0, 64), (1024, 16, 16), (64, 2, 2), (7, 1, 2)]


def best_time(fn, repeat):
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--rows", type=int, default=2000)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()

    names = [n for n in ("cython", "python") if n in kernels.BACKENDS]
    print(f"rows={args.rows}  backends={names}  default={kernels.BACKEND}")
    print(f"{'cols':>6} {'low':>4} {'high':>4} " + " ".join(f"{n + ' us/row':>16}" for n in names) + "   max|diff|")
    gen = np.random.default_rng(0)
    for cols, lo, hi in CASES:
        Z = gen.normal(size=(args.rows, cols))
        times, outs = [], []
        for n in names:
            f = kernels.get_backend(n).partition_sums
            times.append(best_time(lambda: f(Z, lo, hi), args.repeat) / args.rows * 1e6)
            outs.append(np.array(f(Z, lo, hi)))
        diff = max(float(np.max(np.abs(o - outs[0]))) for o in outs)
        print(f"{cols:>6} {lo:>4} {hi:>4} " + " ".join(f"{t:>16.2f}" for t in times) + f"   {diff:.1e}")


if __name__ == "__main__":
    main()
