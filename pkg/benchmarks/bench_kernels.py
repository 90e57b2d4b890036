"""Time the compiled and numpy stepping kernels on the same radial problem.

    python benchmarks/bench_kernels.py [--n 4096] [--steps 2000] [--repeat 3] [--dim 3]

Prints steps per second for each backend and checks that the final states agree.
"""

import argparse
import time

import numpy as np

from critwave import _backend
from critwave.grids import RadialGrid
from critwave.nonlinear import discrete_operators


def run(kern, u0, ut0, inv_mu, stiff, dim, dt, steps):
    u, ut = u0.copy(), ut0.copy()
    buf = np.empty(steps)
    t0 = time.perf_counter()
    done, status = kern.verlet_run(u, ut, inv_mu, stiff, dim, dt, steps, np.inf, buf)
    elapsed = time.perf_counter() - t0
    assert done == steps and status == 0
    return elapsed, u, ut


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=4096)
    ap.add_argument("--steps", type=int, default=2000)
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--dim", type=int, default=3)
    args = ap.parse_args(argv)

    grid = RadialGrid(8.0, args.n)
    r = grid.r
    u0 = 0.5 * np.clip(1 - (r / 2) ** 2, 0, None) ** 4
    ut0 = 0.3 * np.clip(1 - (r / 1.5) ** 2, 0, None) ** 4
    inv_mu, stiff = discrete_operators(grid, args.dim)
    dt = 0.5 * grid.h
    results = {}
    for name, kern in sorted(_backend.available_backends().items()):
        best = min(run(kern, u0, ut0, inv_mu, stiff, args.dim, dt, args.steps)[0] for _ in range(args.repeat))
        _, u, ut = run(kern, u0, ut0, inv_mu, stiff, args.dim, dt, args.steps)
        results[name] = (best, u, ut)
        print(f"{name:>7}: {args.steps / best:12.0f} steps/s  ({best * 1e3:.1f} ms for {args.steps} steps, n={args.n})")
    if len(results) == 2:
        (tc, uc, vc), (tp, up, vp) = results["cython"], results["python"]
        diff = max(np.max(np.abs(uc - up)), np.max(np.abs(vc - vp)))
        print(f"speedup: {tp / tc:.1f}x   max state difference: {diff:.2e}")
    else:
        print("compiled kernel not built; only the numpy fallback was timed")


if __name__ == "__main__":
    main()
