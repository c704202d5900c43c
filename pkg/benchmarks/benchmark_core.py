"""Timing comparison of the numeric core backends.

Runs the hot kernels (batched forward, backward, gradient-of-input, fused
backward) on both the NumPy reference implementation and the compiled
extension, at a few batch sizes and widths, and prints a speedup table.

Usage: python benchmarks/benchmark_core.py [--repeats 30]
"""

import argparse
import time

import numpy as np

from bieinv import network
from bieinv._backend import available_backends, get_core


def _time(fn, repeats):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def _cases(core, theta, m, d, X):
    n = len(X)
    ybar = np.linspace(-1.0, 1.0, n)
    Jbar = np.tile(np.linspace(0.5, 1.5, n)[:, None], (1, d))
    y, cache = core.forward_cache(theta, m, d, X)
    _, J, gcache = core.forward_grad_cache(theta, m, d, X)
    return [
        ("forward", lambda: core.forward(theta, m, d, X)),
        ("forward_cache", lambda: core.forward_cache(theta, m, d, X)),
        ("backward", lambda: core.backward(theta, m, d, X, cache, ybar)),
        ("forward_grad", lambda: core.forward_grad(theta, m, d, X)),
        ("fused_backward",
         lambda: core.fused_backward(theta, m, d, X, gcache, J, ybar, Jbar)),
    ]


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeats", type=int, default=30)
    args = ap.parse_args()

    backends = available_backends()
    print(f"available backends: {', '.join(backends)}")
    if len(backends) < 2:
        print("compiled extension not importable; timing the reference only")

    rng = np.random.default_rng(0)
    rows = []
    for m, d, n in ((10, 2, 256), (10, 2, 2048), (20, 2, 2048), (10, 3, 4096)):
        params = network.init_from_rng(rng, m, d)
        X = rng.uniform(0.0, 1.0, size=(n, d))
        per_backend = {}
        for name in backends:
            core = get_core(name)
            per_backend[name] = {
                label: _time(fn, args.repeats)
                for label, fn in _cases(core, params.theta, m, d, X)
            }
        for label in per_backend[backends[0]]:
            row = [f"m={m} d={d} n={n}", label]
            t_ref = per_backend["numpy"][label]
            row.append(f"{t_ref * 1e6:9.1f}")
            if "compiled" in per_backend:
                t_c = per_backend["compiled"][label]
                row.append(f"{t_c * 1e6:9.1f}")
                row.append(f"{t_ref / t_c:6.2f}x")
            rows.append(row)

    header = ["case", "kernel", "numpy (us)"]
    if "compiled" in backends:
        header += ["compiled (us)", "speedup"]
    widths = [max(len(str(r[i])) for r in [header] + rows) for i in range(len(header))]
    for r in [header] + rows:
        print("  ".join(str(c).ljust(w) for c, w in zip(r, widths)))


if __name__ == "__main__":
    main()
