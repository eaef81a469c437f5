"""Timings for the jitted kernels against their pure-python fallbacks.

Run with the package installed:

    python3 benchmarks/bench_kernels.py

Each kernel is exercised through its public entry point; the python column
calls the same compiled-path code objects via ``python_impl`` so both sides
run identical logic.  Expect one to two orders of magnitude between the
columns when numba is active.
"""

import time

import numpy as np

from toposdf import accel
from toposdf.accel import python_impl
from toposdf.cloud import KdTree
from toposdf.filtration import ScalarGrid, persistence0
from toposdf.meshing import marching_cubes_grid

from toposdf import cloud as _cloud
from toposdf import filtration as _filt
from toposdf import meshing as _mesh


def timed(fn, repeats=3):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def swap(module, name):
    """Temporarily replace a kernel with its pure-python body."""
    jitted = getattr(module, name)
    return jitted, python_impl(jitted)


def bench(label, fn, module_kernels):
    jitted_time = timed(fn)
    originals = []
    for module, name in module_kernels:
        jitted, plain = swap(module, name)
        originals.append((module, name, jitted))
        setattr(module, name, plain)
    try:
        python_time = timed(fn)
    finally:
        for module, name, jitted in originals:
            setattr(module, name, jitted)
    ratio = python_time / jitted_time if jitted_time > 0 else float("inf")
    print(f"{label:<34} jit {jitted_time * 1e3:9.2f} ms   "
          f"python {python_time * 1e3:9.2f} ms   x{ratio:6.1f}")


def main():
    rng = np.random.default_rng(0)
    print(f"numba enabled: {accel.NUMBA_ENABLED}")

    pts = rng.uniform(-1, 1, (20000, 3))
    tree = KdTree(pts)
    queries = rng.uniform(-1, 1, (5000, 3))
    tree.query(queries[:2], k=8)   # compile before timing
    bench(
        "kd-tree 5k queries, k=8",
        lambda: tree.query(queries, k=8),
        [(_cloud, "_query_batch"), (_cloud, "_knn_insert")],
    )

    values = rng.random(32**3)
    grid = ScalarGrid(values, (32, 32, 32))
    persistence0(grid)
    bench(
        "persistence sweep 32^3",
        lambda: persistence0(grid),
        [(_filt, "_sweep"), (_filt, "_uf_find")],
    )

    xs = np.linspace(-1, 1, 64)
    gx, gy, gz = np.meshgrid(xs, xs, xs, indexing="ij")
    sphere = np.sqrt(gx**2 + gy**2 + gz**2).ravel() - 0.6
    marching_cubes_grid(sphere, 64)
    bench(
        "marching cubes 64^3 sphere",
        lambda: marching_cubes_grid(sphere, 64),
        [(_mesh, "_emit_triangles")],
    )


if __name__ == "__main__":
    main()
