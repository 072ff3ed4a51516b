#!/usr/bin/env python3
"""GF(2^8) kernel timings: numba backend vs the pure-numpy fallback.

    python3 benchmarks/bench_kernels.py [--repeat 20]

Both backends are imported side by side, so the env flag is irrelevant here.
"""
import argparse
import time

import numpy as np

from awe import _kernels as K
from awe.erasure import vandermonde


def best_of(fn, repeat):
    fn()  # warm-up, includes jit compilation
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=20)
    args = ap.parse_args()
    if not K.HAVE_NUMBA:
        raise SystemExit("numba unavailable (or AWE_DISABLE_NUMBA set); nothing to compare")

    rng = np.random.default_rng(0)
    print(f"{'kernel':<10}{'shape':>22}{'numpy ms':>12}{'numba ms':>12}{'speedup':>9}")
    for k, n, frag in [(1, 3, 256), (2, 4, 512), (3, 7, 1366), (4, 8, 16384), (8, 16, 65536)]:
        gen = vandermonde(n, k)
        data = rng.integers(0, 256, size=(k, frag), dtype=np.uint8)
        assert np.array_equal(K.gf_matmul_numpy(gen, data), K.gf_matmul_numba(gen, data))
        tn = best_of(lambda: K.gf_matmul_numpy(gen, data), args.repeat)
        tj = best_of(lambda: K.gf_matmul_numba(gen, data), args.repeat)
        print(f"{'encode':<10}{f'{n}x{k} @ {k}x{frag}':>22}{tn * 1e3:12.3f}{tj * 1e3:12.3f}{tn / tj:9.1f}")
    for size in (4, 8, 16, 32):
        a = vandermonde(size, size)
        assert np.array_equal(K.gf_invert_numpy(a), K.gf_invert_numba(a))
        tn = best_of(lambda: K.gf_invert_numpy(a), args.repeat)
        tj = best_of(lambda: K.gf_invert_numba(a), args.repeat)
        print(f"{'invert':<10}{f'{size}x{size}':>22}{tn * 1e3:12.3f}{tj * 1e3:12.3f}{tn / tj:9.1f}")


if __name__ == "__main__":
    main()
