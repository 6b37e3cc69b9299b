"""Compiled kernels against the NumPy fallback.

    python benchmarks/bench_kernels.py [--repeat 5]

Checks the two backends agree bit-for-bit before timing them.
"""
import argparse
import time

import numpy as np

from idusel import _pykernels

try:
    from idusel import _ckernels
except ImportError:
    _ckernels = None


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        start = time.perf_counter()
        fn()
        times.append(time.perf_counter() - start)
    return min(times)


def cases(seed=0):
    rng = np.random.default_rng(seed)
    points = rng.normal(size=(100_000, 16))
    centroids = rng.normal(size=(8, 16))
    sizes = np.array([62828, 61844, 71712, 69728, 93923, 107415, 52574], dtype=float)
    supply = 0.9 * sizes / sizes.sum()
    uniforms = rng.random(100_000)
    return {
        "kmeans_assign n=1e5 d=16 k=8": lambda m: m.kmeans_assign(points, centroids),
        "exp3_rollout K=7 rounds=1e5": lambda m: m.exp3_rollout(np.ones(7), 0.05, supply, uniforms),
    }


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    if _ckernels is None:
        print("compiled extension not built; run `pip install -e . --no-build-isolation` first")
        return
    print(f"{'kernel':34s} {'python s':>10s} {'cython s':>10s} {'speedup':>8s}")
    for name, call in cases().items():
        py_out, c_out = call(_pykernels), call(_ckernels)
        for a, b in zip(py_out, c_out):
            assert np.array_equal(a, b), f"{name}: backends disagree"
        t_py = best_of(lambda: call(_pykernels), args.repeat)
        t_c = best_of(lambda: call(_ckernels), args.repeat)
        print(f"{name:34s} {t_py:10.4f} {t_c:10.4f} {t_py / t_c:7.1f}x")


if __name__ == "__main__":
    main()
