"""Compiled vs pure-Python coordinate-descent kernel.

    python3 benchmarks/bench_kernels.py [--repeat 5]

Times the bare kernel on random weighted-lasso subproblems, then a full GBM
path sketch on a simulated case-control dataset with each backend swapped in.
"""
import argparse
import time

import numpy as np

from sparsecc import kernels
from sparsecc.path import gbm
from sparsecc.simulate import MarginalSpec, make_truth, sample_case_control


def _best(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def bench_kernel(impl, N, M, repeat):
    rng = np.random.default_rng(0)
    Z = np.asfortranarray(rng.standard_normal((N, M)))
    w = rng.uniform(0.05, 0.25, N)
    g = rng.normal(scale=0.2, size=M)

    def run():
        coef = np.zeros(M)
        impl.cd_solve(Z, w, g, 0.01, coef, np.zeros(N), 0.02, 200, 1e-10)

    return _best(run, repeat)


def bench_gbm(impl, data, repeat):
    saved = kernels._impl
    kernels._impl = impl
    try:
        return _best(lambda: gbm(data, k_max=20), repeat)
    finally:
        kernels._impl = saved


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    try:
        compiled = kernels.get_backend("cython")
    except ImportError:
        raise SystemExit("compiled kernel not built; run `pip install -e .` first")
    python = kernels.get_backend("python")

    print(f"{'case':<28}{'cython (s)':>12}{'python (s)':>12}{'speedup':>10}")
    for N, M in ((200, 50), (400, 200), (1000, 500)):
        c = bench_kernel(compiled, N, M, args.repeat)
        p = bench_kernel(python, N, M, args.repeat)
        print(f"{f'kernel N={N} M={M}':<28}{c:>12.4f}{p:>12.4f}{p / c:>10.1f}")

    spec = MarginalSpec("nor_iid", 100)
    truth = make_truth(spec, 3, seed=0, mc=200_000)
    data = sample_case_control(spec, truth, 100, 1)
    c = bench_gbm(compiled, data, args.repeat)
    p = bench_gbm(python, data, max(1, args.repeat // 2))
    print(f"{'gbm 2n=200 M=100 k_max=20':<28}{c:>12.4f}{p:>12.4f}{p / c:>10.1f}")


if __name__ == "__main__":
    main()
