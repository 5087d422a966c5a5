"""Compiled vs numpy kernels on a pulled-back vortex.

    python3 benchmarks/bench_kernels.py [--n 65] [--nz 33] [--repeat 5]

Both backends are imported directly, so one process times both; the
outputs are compared before timing.
"""
import argparse
import timeit

import numpy as np

from swlab import _kernels_py
from swlab.grid import Grid2, Grid3
from swlab.sw3d import bump, pullback
from swlab.vortex import solve_vortex

try:
    from swlab import _kernels
except ImportError:
    _kernels = None


def setup(n, nz, h=0.2):
    g2 = Grid2(n + 40, n + 40, h)
    v = solve_vortex([0.3 + 0.1j, -0.8j], g2)
    g3 = Grid3(n, n, nz, h)
    c = pullback(v, 1.0, g3)
    beta = 0.05 * bump(g3, (0.2, 0.1, 0.0), 2.0) * (1 + 0.5j)
    return (c.A1, c.A2, c.A3, c.alpha, c.beta + beta, h, 1.0)


def max_diff(a, b):
    if isinstance(a, tuple):
        return max(max_diff(x, y) for x, y in zip(a, b))
    return float(np.max(np.abs(np.asarray(a) - np.asarray(b))))


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--n", type=int, default=65)
    ap.add_argument("--nz", type=int, default=33)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    fields = setup(args.n, args.nz)
    print(f"grid {args.n}x{args.n}x{args.nz}")
    if _kernels is None:
        print("compiled extension not built; numpy timings only")
    print(f"{'kernel':<12}{'numpy [ms]':>12}{'cython [ms]':>13}{'speedup':>9}{'max diff':>11}")
    for name in ("residual", "energy", "energy_grad"):
        fp = getattr(_kernels_py, name)
        tp = min(timeit.repeat(lambda: fp(*fields), number=1, repeat=args.repeat)) * 1e3
        if _kernels is None:
            print(f"{name:<12}{tp:12.2f}")
            continue
        fc = getattr(_kernels, name)
        diff = max_diff(fp(*fields), fc(*fields))
        tc = min(timeit.repeat(lambda: fc(*fields), number=1, repeat=args.repeat)) * 1e3
        print(f"{name:<12}{tp:12.2f}{tc:13.2f}{tp / tc:9.1f}{diff:11.1e}")


if __name__ == "__main__":
    main()
