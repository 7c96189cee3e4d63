"""Compiled vs numpy kernels, plus one end-to-end 2D solve per backend.

    python3 benchmarks/bench_kernels.py [--repeat 5]
"""
import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from quasiflux import _kernels

SOLVE_SNIPPET = """
import time
from quasiflux import Bracket, ProblemSpec, Rectangle2D, build_grid, parse, solve_dirichlet, BACKEND
p = ProblemSpec(build_grid(Rectangle2D(0, 1, 0, 1), {n}), parse("1 + s^2"),
                parse("2*pi^2*sin(pi*x)*sin(pi*y)"), Bracket(-1, 2, 20, 0))
t = time.perf_counter(); r = solve_dirichlet(p, 0.0); dt = time.perf_counter() - t
print(BACKEND, r.iterations, dt)
"""


def best(fn, repeat):
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def kernel_cases(n, rng):
    ax = 1.0 + rng.random((n - 1, n))
    ay = 1.0 + rng.random((n, n - 1))
    u = rng.standard_normal((n, n))
    b = rng.standard_normal((n, n))
    m = n * n
    sub = -rng.random(m - 1)
    diag = 2.5 + rng.random(m)
    rhs = rng.standard_normal(m)
    h = 1.0 / (n - 1)
    return {
        f"tridiag m={m}": lambda k: k.tridiag_solve(sub, diag, sub, rhs),
        f"apply_5pt {n}x{n}": lambda k: k.apply_5pt(u, ax, ay, h, h),
        f"pcg_5pt {n}x{n}": lambda k: k.pcg_5pt(ax, ay, h, h, b, np.zeros((n, n)), 1e-8, 20000),
    }


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--sizes", type=int, nargs="+", default=[65, 129])
    args = ap.parse_args()
    kernels = _kernels.backends()
    if "cython" not in kernels:
        print("compiled extension not built; only the numpy backend is available")
    rng = np.random.default_rng(0)
    print(f"{'kernel':<22}" + "".join(f"{name:>12}" for name in kernels) + f"{'speedup':>10}")
    for n in args.sizes:
        for label, fn in kernel_cases(n, rng).items():
            times = {name: best(lambda: fn(k), args.repeat) for name, k in kernels.items()}
            speed = times["python"] / times["cython"] if "cython" in times else float("nan")
            print(f"{label:<22}" + "".join(f"{1e3 * t:>10.3f}ms" for t in times.values()) + f"{speed:>9.1f}x")

    print("\nend-to-end 2D Dirichlet solve (a = 1 + s^2)")
    for n in args.sizes:
        for pure in ("0", "1"):
            env = dict(os.environ, QUASIFLUX_PURE_PYTHON=pure)
            out = subprocess.run([sys.executable, "-c", SOLVE_SNIPPET.format(n=n)], env=env,
                                 capture_output=True, text=True, check=True).stdout.split()
            print(f"  n={n:<4} backend={out[0]:<7} picard={out[1]:<4} time={float(out[2]):.3f}s")


if __name__ == "__main__":
    main()
