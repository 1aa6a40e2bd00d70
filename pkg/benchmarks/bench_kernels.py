"""Time the distance kernels under the numba and numpy backends.

    python3 benchmarks/bench_kernels.py --n 2000 --k 10 --r 2
"""

import argparse
import time

import numpy as np

from mixkmeans import kernels
from mixkmeans.simfloat import FP16, FP64, round_array


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--n", type=int, default=2000)
    ap.add_argument("--k", type=int, default=10)
    ap.add_argument("--r", type=int, default=2)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()

    rng = np.random.default_rng(0)
    X = rng.standard_normal((args.n, args.r))
    C = rng.standard_normal((args.k, args.r)) * 3.0
    Xl, Cl = round_array(X, FP16), round_array(C, FP16)
    xx64, cc64 = kernels.row_norms(X, FP64), kernels.row_norms(C, FP64)
    xxl, ccl = kernels.row_norms(Xl, FP16), kernels.row_norms(Cl, FP16)

    cases = {
        "gram fp64": lambda: kernels.gram_block(X, C, xx64, cc64, FP64),
        "gram fp16": lambda: kernels.gram_block(Xl, Cl, xxl, ccl, FP16),
        "mixed fp16 delta=2": lambda: kernels.mixed_block(X, C, xx64, cc64, 2.0, FP16),
        "diff fp16": lambda: kernels.diff_block(Xl, Cl, FP16),
    }
    print(f"n={args.n} k={args.k} r={args.r}, best of {args.repeat}")
    print(f"{'kernel':<20}{'numba (ms)':>12}{'numpy (ms)':>12}{'speedup':>9}")
    for name, fn in cases.items():
        res = {}
        for backend in ("numba", "numpy"):
            with kernels.use_backend(backend):
                fn()  # compile / warm up
                res[backend] = best_of(fn, args.repeat)
        print(f"{name:<20}{res['numba'] * 1e3:12.2f}{res['numpy'] * 1e3:12.2f}{res['numpy'] / res['numba']:9.1f}x")


if __name__ == "__main__":
    main()
