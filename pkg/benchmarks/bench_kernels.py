"""Compare the compiled and numpy backends on the two hot kernels.

Usage: python benchmarks/bench_kernels.py [--n 1000] [--repeat 3]

Prints wall-clock seconds per backend for an SMO solve on a synthetic RBF
regression and for a full PPT-fidelity SDP on a random two-qutrit state.
"""
import argparse
import time

import numpy as np

from qrest import _fallback, kernels, svm
from qrest.qcore import DensityMatrix
from qrest.sdp.programs import max_fidelity_ppt


def _best(fn, repeat):
    times = []
    for _ in range(repeat):
        t = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t)
    return min(times), out


def bench_smo(n, repeat):
    rng = np.random.default_rng(0)
    x = rng.uniform(-1, 1, (n, 5))
    y = np.sin(3 * x[:, 0]) + x[:, 1] ** 2 + 0.05 * rng.normal(size=n)
    k = svm.KernelSpec("rbf", tau=1.0).gram(x, x)
    for backend in ("cython", "python"):
        sec, (_, _, iters, _, obj) = _best(lambda: svm.solve_dual(k, y, 10.0, 10.0, 0.01, 1e-3, 10**7, backend), repeat)
        print(f"smo     n={n:<5d} {backend:<7s} {sec:8.3f}s  iterations={iters} objective={obj:.10f}")


def bench_sdp(repeat):
    rng = np.random.default_rng(1)
    g = rng.normal(size=(9, 9)) + 1j * rng.normal(size=(9, 9))
    m = g @ g.conj().T
    rho = DensityMatrix(m / np.trace(m).real, (3, 3))
    saved = kernels._impl
    try:
        for backend, impl in (("cython", kernels._pick("cython")), ("python", _fallback)):
            kernels._impl = impl
            sec, val = _best(lambda: max_fidelity_ppt(rho), repeat)
            print(f"sdp     3x3 ppt {backend:<7s} {sec:8.3f}s  value={val:.10f}")
    finally:
        kernels._impl = saved


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=1000)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    bench_smo(args.n, args.repeat)
    bench_sdp(args.repeat)


if __name__ == "__main__":
    main()
