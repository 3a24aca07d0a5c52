"""Compiled vs numpy kernels on representative workloads.

    python3 benchmarks/bench_kernels.py [--repeat N]

Prints the best-of-N wall time per kernel and backend, the speed-up, and the
largest difference between the two backends' outputs.
"""
import argparse
import time

import numpy as np

from tomokin import kernels
from tomokin.numerics import Grid1D
from tomokin.phasespace import GaussianSpec, make_gaussian
from tomokin.tomoprop import upwind_tables


def _cases():
    rng = np.random.default_rng(0)
    ax = Grid1D.centered(9.0, 256)
    f = make_gaussian(GaussianSpec.standard(), (ax, ax)).values[None]
    ang = rng.uniform(0, 2 * np.pi, 40)
    mu, nu = np.cos(ang), np.sin(ang)
    X = Grid1D.centered(8.0, 128).points
    grid = rng.standard_normal((64, 64, 64))
    pts = rng.uniform(0, 63, (200_000, 3))
    w = rng.standard_normal((32, 128, 128))
    coef = rng.standard_normal((32, 128))
    tabs = upwind_tables(128, 0.03)
    return {
        "radon_lines 256^2 x 40 frames": lambda: kernels.radon_lines(
            f, ax.lo, ax.h, ax.lo, ax.h, mu, nu, X, X[1] - X[0], 6)[0],
        "interp_nd 64^3, 2e5 points": lambda: kernels.interp_nd(
            grid, np.zeros(3), np.ones(3), pts, 6),
        "advect_add 32x128x128": lambda: kernels.advect_add(
            w, coef, np.zeros_like(w), *tabs),
    }


def _best(fn, repeat):
    fn()
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)
    try:
        kernels.use_backend("cython")
    except ImportError:
        print("compiled extension not built; only the numpy backend is available")
        return 1
    print(f"{'kernel':34s} {'python s':>10s} {'cython s':>10s} {'speed-up':>9s} {'max diff':>10s}")
    for name, fn in _cases().items():
        out, times = {}, {}
        for backend in ("python", "cython"):
            kernels.use_backend(backend)
            times[backend] = _best(fn, args.repeat)
            res = fn()
            out[backend] = np.asarray(res)
        diff = float(np.abs(out["python"] - out["cython"]).max())
        print(f"{name:34s} {times['python']:10.4f} {times['cython']:10.4f} "
              f"{times['python'] / times['cython']:8.1f}x {diff:10.2e}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
