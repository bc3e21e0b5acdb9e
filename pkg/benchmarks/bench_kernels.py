#!/usr/bin/env python3
"""Benchmark the compiled kernels against the pure-numpy fallback.

Times the fused pointwise kernels in isolation and the full residual
evaluation (the solver's hot path) with each backend, plus one short
integration.  Run after building the extension:

    python3 benchmarks/bench_kernels.py [--grid 60] [--repeats 2000]
"""

import argparse
import time

import numpy as np

import tearfilm as tf
from tearfilm import kernels
from tearfilm.kernels import _reference
from tearfilm.model import residual_packed


def timeit(fn, repeats):
    fn()  # warm up
    best = np.inf
    for _ in range(5):
        t0 = time.perf_counter()
        for _ in range(repeats):
            fn()
        best = min(best, (time.perf_counter() - t0) / repeats)
    return best * 1e6  # us


def bench_backend(impl, grid, J, params, fields, repeats):
    rng = np.random.default_rng(0)
    h = 0.5 + 0.5 * rng.random(grid.shape)
    px, py = rng.standard_normal((2,) + grid.shape)
    divq = rng.standard_normal(grid.shape)
    c = 1.0 + rng.random(grid.shape)
    s2 = grid.k2
    cc, mbar = 0.02, 0.05
    w = 1.0 - cc * s2 / params.Pe_c
    g = 1.0 / (1.0 + cc * mbar * s2 * s2)
    R = rng.standard_normal((3,) + s2.shape) + 1j * rng.standard_normal((3,) + s2.shape)

    rows = {}
    rows["film_flux"] = timeit(lambda: impl.film_flux(h, px, py), repeats)
    rows["thickness_rhs"] = timeit(
        lambda: impl.thickness_rhs(divq, c, J, params.Pc), repeats)
    rows["solute_rhs"] = timeit(
        lambda: impl.solute_rhs(h, c, px, py, px, py, divq, c, J,
                                params.Pc, params.Pe_c), repeats)
    rows["precond_apply"] = timeit(
        lambda: impl.precond_apply(s2, w, g, mbar, cc, params.Pc, *R), repeats)

    # swap the selected backend inside the kernels facade for the
    # end-to-end numbers
    saved = (kernels.film_flux, kernels.thickness_rhs, kernels.solute_rhs,
             kernels.precond_apply)
    kernels.film_flux = impl.film_flux
    kernels.thickness_rhs = impl.thickness_rhs
    kernels.solute_rhs = impl.solute_rhs
    kernels.precond_apply = impl.precond_apply
    try:
        rows["residual (full)"] = timeit(
            lambda: residual_packed(fields, J, params, grid),
            max(repeats // 4, 50))
    finally:
        (kernels.film_flux, kernels.thickness_rhs, kernels.solute_rhs,
         kernels.precond_apply) = saved
    return rows


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--grid", type=int, default=60)
    ap.add_argument("--repeats", type=int, default=2000)
    args = ap.parse_args()

    params = tf.ModelParams()
    grid = tf.PeriodicGrid(args.grid, args.grid)
    J = tf.eval_J([tf.EvaporationPeak(a=1.0, widths=(0.5, 0.5))], 0.1, grid)
    rng = np.random.default_rng(1)
    fields = np.stack([
        1.0 + 0.1 * rng.standard_normal(grid.shape),
        0.1 * rng.standard_normal(grid.shape),
        1.0 + 0.1 * rng.standard_normal(grid.shape),
    ])

    backends = {"numpy": _reference}
    try:
        from tearfilm.kernels import _speedups

        backends["cython"] = _speedups
    except ImportError:
        print("compiled extension not available; benchmarking numpy only")

    results = {name: bench_backend(impl, grid, J, params, fields, args.repeats)
               for name, impl in backends.items()}
    names = list(next(iter(results.values())))
    print(f"\ngrid {args.grid}x{args.grid}, times in us per call")
    header = f"{'kernel':<18}" + "".join(f"{b:>12}" for b in results)
    if len(results) == 2:
        header += f"{'speedup':>10}"
    print(header)
    for name in names:
        line = f"{name:<18}" + "".join(f"{results[b][name]:12.1f}" for b in results)
        if len(results) == 2:
            line += f"{results['numpy'][name] / results['cython'][name]:10.2f}x"
        print(line)


if __name__ == "__main__":
    main()
