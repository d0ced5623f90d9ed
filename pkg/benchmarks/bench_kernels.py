#!/usr/bin/env python3
"""Benchmark the compiled kernels against the pure-Python fallback.

Usage:  python benchmarks/bench_kernels.py [--repeat N]
"""

import argparse
import time

import numpy as np

from hyperstab._kernels import _py, compiled_available


def _time(fn, repeat):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    if not compiled_available():
        print("compiled kernels not available; build the extension first "
              "(pip install -e . --no-build-isolation)")
        return 1
    from hyperstab._kernels import _cy
    rng = np.random.default_rng(0)
    rows = []

    for n in (2, 3, 4, 8, 16):
        mats = rng.standard_normal((200, n, n)) \
            + 1j * rng.standard_normal((200, n, n))
        rows.append((
            f"eigvals {n}x{n} (200 mats)",
            _time(lambda: [_py.eigvals(m) for m in mats], args.repeat),
            _time(lambda: [_cy.eigvals(m) for m in mats], args.repeat),
        ))

    k3 = rng.standard_normal((3, 3)).astype(complex)
    th = rng.uniform(0, 2 * np.pi, size=(4096, 2))
    rows.append((
        "phase grid 64x64, n=3",
        _time(lambda: _py.phase_grid_spectral_radius(k3, th), args.repeat),
        _time(lambda: _cy.phase_grid_spectral_radius(k3, th), args.repeat),
    ))

    n = 4
    k = rng.uniform(-0.4, 0.4, size=(n, n))
    r = rng.uniform(0.5, 1.5, size=n)
    dt = r.min() / 32
    nhist = int(round(r.max() / dt)) + 1
    nsteps = 50_000
    base = np.ones((nhist + nsteps, n))

    def run(impl):
        impl.delay_linear_advance(k, r / dt, base.copy(), nhist, nsteps)

    rows.append((
        "delay advance n=4, 50k steps",
        _time(lambda: run(_py), args.repeat),
        _time(lambda: run(_cy), args.repeat),
    ))

    width = max(len(r[0]) for r in rows)
    print(f"{'kernel':<{width}}  {'python':>10}  {'cython':>10}  {'speedup':>8}")
    for name, tp, tc in rows:
        print(f"{name:<{width}}  {tp * 1e3:>8.2f}ms  {tc * 1e3:>8.2f}ms  "
              f"{tp / tc:>7.1f}x")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
