#!/usr/bin/env python3
"""Benchmark the compiled element kernels against the NumPy backend.

Times the three hot kernels (form matrices, estimator terms, error terms)
on uniformly refined meshes and prints one table per mesh size.

    python benchmarks/bench_kernels.py [--levels N] [--repeats R] [--threads T]
"""

import argparse
import time

import numpy as np

from obstaclefem import quadrature
from obstaclefem._kernels import pykernels
from obstaclefem.mesh import create_structured, refine_nvb
from obstaclefem.spaces import kernel_mesh_arrays

try:
    from obstaclefem._kernels import _ckernels as ckernels
except ImportError:
    ckernels = None


def build_args(mesh, rng):
    n = mesh.n_elements
    bary, w = quadrature.triangle_rule(5)
    geo = kernel_mesh_arrays(mesh)
    u_cell = rng.normal(size=(n, 3))
    s_cell = rng.normal(size=(n, 3))
    lam = np.abs(rng.normal(size=n))
    d = [rng.normal(size=(n, 7)) for _ in range(4)]
    return {
        "cell_matrices": (*geo, 3.0, 0),
        "estimator_cells": (*geo, u_cell, s_cell, lam, d[0], d[1],
                            d[2], d[3], bary, w),
        "error_cells": (*geo, u_cell, s_cell, lam, d[0], d[1], d[2],
                        d[1], d[2], bary, w),
    }


def timeit(func, args, repeats):
    best = np.inf
    for _ in range(repeats):
        start = time.perf_counter()
        func(*args)
        best = min(best, time.perf_counter() - start)
    return best


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--levels", type=int, default=3,
                        help="number of mesh sizes (default 3)")
    parser.add_argument("--repeats", type=int, default=5)
    args = parser.parse_args()

    rng = np.random.default_rng(0)
    mesh = create_structured("lshape_bartels", 4)
    for _ in range(4):
        mesh = refine_nvb(mesh, range(mesh.n_elements))

    backends = [("numpy", pykernels)]
    if ckernels is not None:
        backends.append(("cython", ckernels))
    else:
        print("compiled kernels unavailable; timing the NumPy backend only")

    for _ in range(args.levels):
        mesh = refine_nvb(mesh, range(mesh.n_elements))
        kernel_args = build_args(mesh, rng)
        print(f"\nmesh with {mesh.n_elements} elements")
        header = f"{'kernel':<18}" + "".join(f"{name:>12}" for name, _ in backends)
        if len(backends) == 2:
            header += f"{'speedup':>10}"
        print(header)
        for kernel in ("cell_matrices", "estimator_cells", "error_cells"):
            times = [timeit(getattr(mod, kernel), kernel_args[kernel],
                            args.repeats) for _, mod in backends]
            row = f"{kernel:<18}" + "".join(f"{t * 1e3:>10.2f}ms" for t in times)
            if len(times) == 2:
                row += f"{times[0] / times[1]:>9.1f}x"
            print(row)


if __name__ == "__main__":
    main()
