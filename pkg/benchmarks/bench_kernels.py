"""Time the numba kernels against their pure-numpy twins.

Usage::

    python3 benchmarks/bench_kernels.py [--repeat 5] [--T 8192]

Each kernel is run once per backend before timing so that JIT compilation is
excluded; the table reports the best of ``--repeat`` runs and checks that
both backends agree.
"""
import argparse
import time

import numpy as np

from locmem import kernels
from locmem._accel import HAS_NUMBA
from locmem.wavelets import get_bank


def best_of(fn, repeat):
    fn()
    best = np.inf
    for _ in range(repeat):
        t = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t)
    return best, out


def cases(T):
    rng = np.random.default_rng(0)
    N = 1024
    u = np.arange(1, T + 1) / T
    d = (1 - np.cos(np.pi * u / 2)) / 3
    phi = np.full((T, 1), 0.8)
    theta = np.zeros((T, 0))
    sigma = np.ones(T)
    eps = rng.standard_normal(T + N)
    yield "tvarfima_ma", lambda be: kernels.tvarfima_ma(d, phi, theta, sigma, eps, N, backend=be)

    table = rng.standard_normal((65, 2 * N + 1))
    pos = np.linspace(0, 63.999, T)
    idx = np.floor(pos).astype(np.int64)
    frac = pos - idx
    eps2 = rng.standard_normal(T + 2 * N)
    yield "tabulated_ma", lambda be: kernels.tabulated_ma(table, idx, frac, eps2, backend=be)

    w = rng.standard_normal(64 * T) ** 2
    yield "exp_scan", lambda be: kernels.exp_scan(w, 0.999, backend=be)

    bank = get_bank(2)
    xi = np.linspace(-200, 200, 16 * T)
    yield "cascade_product", lambda be: bank.psi_hat(xi, backend=be)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--T", type=int, default=8192, help="series length driving the sizes")
    args = ap.parse_args(argv)
    backends = ["numpy"] + (["numba"] if HAS_NUMBA else [])
    print(f"{'kernel':<16}" + "".join(f"{b:>12}" for b in backends) + f"{'speedup':>10}"
          + f"{'max diff':>12}")
    for name, fn in cases(args.T):
        times, outs = [], []
        for be in backends:
            t, out = best_of(lambda: fn(be), args.repeat)
            times.append(t)
            outs.append(out)
        speed = times[0] / times[-1] if len(times) > 1 else float("nan")
        diff = float(np.max(np.abs(outs[0] - outs[-1])))
        print(f"{name:<16}" + "".join(f"{t * 1e3:>10.2f}ms" for t in times)
              + f"{speed:>9.1f}x" + f"{diff:>12.1e}")


if __name__ == "__main__":
    main()
