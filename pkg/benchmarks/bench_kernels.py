"""Time the compiled kernels against the pure-Python fallback.

    python3 benchmarks/bench_kernels.py [--repeat 5]
"""
import argparse
import timeit

import numpy as np

from pmo import _kernels_py
from pmo.polyalg import basis

try:
    from pmo import _kernels
except ImportError:
    _kernels = None


def cases():
    rng = np.random.default_rng(0)
    B = basis(3, 4).array
    S = np.array([[0, 0, 0], [2, 0, 0], [0, 2, 0], [0, 0, 2]])
    c = np.array([1.0, -1.0, -1.0, -1.0])
    exps = rng.integers(0, 6, size=(20000, 4))
    ta = {tuple(int(v) for v in rng.integers(0, 4, 3)): float(rng.standard_normal()) for _ in range(40)}
    tb = {tuple(int(v) for v in rng.integers(0, 4, 3)): float(rng.standard_normal()) for _ in range(40)}
    return {
        "localizing_triplets (n=3, t=4)": lambda k: k.localizing_triplets(B, S, c),
        "gram_coefficient_map (n=3, d=4)": lambda k: k.gram_coefficient_map(B),
        "grlex_rank_array (20000 x 4)": lambda k: k.grlex_rank_array(exps),
        "poly_mul (40 x 40 terms)": lambda k: k.poly_mul(ta, tb),
    }


def _same(a, b):
    if isinstance(a, dict):
        return a == b
    if isinstance(a, tuple):
        return all(np.array_equal(u, v) for u, v in zip(a, b))
    return np.array_equal(a, b)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    if _kernels is None:
        print("compiled kernels not built; run `pip install -e . --no-build-isolation` first")
    print(f"{'kernel':36s} {'python [ms]':>12s} {'cython [ms]':>12s} {'speedup':>8s}")
    for name, fn in cases().items():
        tp = min(timeit.repeat(lambda: fn(_kernels_py), number=1, repeat=args.repeat)) * 1e3
        if _kernels is None:
            print(f"{name:36s} {tp:12.3f} {'-':>12s} {'-':>8s}")
            continue
        same = _same(fn(_kernels_py), fn(_kernels))
        tc = min(timeit.repeat(lambda: fn(_kernels), number=1, repeat=args.repeat)) * 1e3
        print(f"{name:36s} {tp:12.3f} {tc:12.3f} {tp / tc:7.1f}x{'' if same else '  MISMATCH'}")


if __name__ == "__main__":
    main()
