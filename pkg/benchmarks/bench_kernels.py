"""Compare the compiled and pure-Python kernels.

Run ``python benchmarks/bench_kernels.py``. Reports per-call time for one
monodromy period and one reaction substep over a 2048-point field.
"""

import math
import timeit

import numpy as np

from floquet_rd import _pykernels
from floquet_rd._kernels import available_backends


def main(repeat=5):
    eps, theta = 0.5, 0.3
    c, s = math.cos(theta), math.sin(theta)
    D = np.array([[1.0, 0.0], [0.0, 0.5]])
    y0 = np.array([eps, 0.0, 1.0, 0.0, 0.0, 1.0])
    field = np.random.default_rng(0).normal(scale=0.5, size=(2, 2048))
    backends = available_backends()
    if backends.get("cython") is None:
        print("compiled extension not built; only the Python backend is available")
    rows = []
    for name, mod in backends.items():
        if mod is None:
            continue
        mono = lambda: mod.dopri_example(y0, 0.0, 2 * math.pi, eps, c, s, D, 0.25, 0.125, True,
                                         1e-10, 1e-12, 0.0, 10**6)
        u = field.copy()
        react = lambda: mod.reaction_rk4_example(u, 0.005, eps, c, s, 1)
        n = 3 if mod is _pykernels else 200
        t_m = min(timeit.repeat(mono, number=n, repeat=repeat)) / n
        t_r = min(timeit.repeat(react, number=n, repeat=repeat)) / n
        rows.append((name, t_m, t_r))
    print(f"{'backend':<8s} {'monodromy [ms]':>15s} {'reaction [ms]':>14s}")
    for name, t_m, t_r in rows:
        print(f"{name:<8s} {1e3 * t_m:15.3f} {1e3 * t_r:14.3f}")
    if len(rows) == 2:
        print(f"speedup  {rows[0][1] / rows[1][1]:15.1f} {rows[0][2] / rows[1][2]:14.1f}")


if __name__ == "__main__":
    main()
