"""Acceptance gate: one test per criterion, each recording a PASS/FAIL line.

The lines are printed in the terminal summary of the pytest run.
"""
import time

import numpy as np
import pytest

from locmem.asymptotics import K_of_d, K_of_d_reference, local_wavelet_spectrum
from locmem.estimator import EstimationPlan, estimate, estimate_d, ols_regression_weights
from locmem.scalogram import (
    LocalScalogram,
    default_grid,
    dwt,
    local_scalogram,
    streaming_scalogram,
)
from locmem.simulate import MemoryCurve, TvArfimaModel, TvFgnModel, simulate
from locmem.wavelets import get_bank
from locmem.weights import WeightScheme, numerical_V

LOG2 = np.log(2.0)
BANK = get_bank(2)


# ---------------------------------------------------------------- 1


def test_exact_slope_recovery(acceptance):
    t0 = time.perf_counter()
    worst = 0.0
    for ell in (1, 2, 4):
        plan = EstimationPlan(2, ell, u_grid=[0.25, 0.5, 0.75])
        for d in (-0.4, 0.0, 0.3, 0.7, 1.2):
            vals = np.array([[1.7 * 2.0 ** (2 * d * j)] * 3 for j in plan.scales])
            sc = LocalScalogram(plan.u_grid, plan.scales, vals, np.full_like(vals, 0.01),
                                np.ones(3, dtype=bool), "kernel:rectangle", 0.25, 4096)
            worst = max(worst, float(np.max(np.abs(estimate_d(sc, plan).d_hat - d))))
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-12 and elapsed < 1.0
    acceptance(1, ok, f"max |d_hat - d| = {worst:.2e} (tol 1e-12), {elapsed:.3f} s (< 1 s)")
    assert ok


# ---------------------------------------------------------------- 2


def test_regression_weight_constraints(acceptance):
    worst = 0.0
    for ell in range(1, 9):
        w = np.array(ols_regression_weights(ell).w)
        i = np.arange(ell + 1)
        worst = max(worst, abs(w.sum()), abs(2 * LOG2 * (i @ w) - 1))
    w2 = np.array(ols_regression_weights(2).w)
    close = np.allclose(w2, [-0.360674, 0.0, 0.360674], atol=5e-7)
    ok = worst <= 1e-14 and close
    acceptance(2, ok, f"max constraint residual {worst:.1e} (tol 1e-14); ell=2 w = "
                      f"({w2[0]:.6f}, {w2[1]:.6f}, {w2[2]:.6f})")
    assert ok


# ---------------------------------------------------------------- 3


def test_K_parseval_and_dual_quadrature(acceptance):
    k0 = abs(K_of_d(0.0, BANK) / (2 * np.pi) - 1)
    dual = max(abs(K_of_d(d, BANK) / K_of_d_reference(d, BANK) - 1)
               for d in (-0.3, 0.2, 0.4, 1.0))
    ok = k0 <= 1e-6 and dual <= 1e-5
    acceptance(3, ok, f"|K(0)/2pi - 1| = {k0:.1e} (tol 1e-6); dual-quadrature rel diff "
                      f"{dual:.1e} (tol 1e-5)")
    assert ok


# ---------------------------------------------------------------- 4


def test_bias_law_fgn(acceptance):
    t0 = time.perf_counter()
    m = TvFgnModel(0.9)  # d = H - 1/2 = 0.4
    s = {j: local_wavelet_spectrum(m, 0.5, j, BANK) for j in (6, 7, 8, 9)}
    slopes = [np.log2(s[j + 1] / s[j]) / 2 for j in (6, 7, 8)]
    elapsed = time.perf_counter() - t0
    err = max(abs(x - 0.4) for x in slopes)
    ok = err <= 0.02 and elapsed < 10
    acceptance(4, ok, f"half log2 ratios {', '.join(f'{x:.5f}' for x in slopes)} "
                      f"(within {err:.1e} of 0.4, tol 0.02), {elapsed:.2f} s")
    assert ok


# ---------------------------------------------------------------- 5


def test_weight_limit_oracles(acceptance):
    t0 = time.perf_counter()
    worst = {}
    for kind, const in (("kernel", 2 * np.pi), ("recursive", np.pi)):
        s = WeightScheme(kind, 0.01)
        errs = []
        for m in (0, 1, 2):
            for v in range(2**m):
                V = numerical_V(s, 0.5, 100_000, 0, 0, m, v)
                errs.append(abs(V / (const * 2.0**-m) - 1))
        worst[kind] = max(errs)
    elapsed = time.perf_counter() - t0
    ok = max(worst.values()) <= 0.05 and elapsed < 30
    acceptance(5, ok, f"max rel error rectangle {worst['kernel']:.1e}, recursive "
                      f"{worst['recursive']:.1e} (tol 5e-2), {elapsed:.2f} s")
    assert ok


# ---------------------------------------------------------------- 6


def test_streaming_batch_equivalence(acceptance):
    rng = np.random.default_rng(6)
    worst = 0.0
    for n in range(50):
        T = int(rng.integers(600, 5000))
        order = int(rng.integers(1, 5))
        b = float(rng.uniform(0.05, 0.5))
        x = rng.standard_normal(T) * 10 ** rng.uniform(-3, 3) + rng.uniform(-5, 5)
        bank = get_bank(order)
        J = min(5, bank.max_scale(T))
        scales = tuple(range(1, J + 1))
        chunk = int(rng.choice([1, 3, 64, 997, T]))
        stream = streaming_scalogram(x, bank, scales, T, b, chunk=chunk).scalogram(
            default_grid(40))
        batch = local_scalogram(dwt(x, bank, J), WeightScheme("recursive", b),
                                default_grid(40), scales, method="explicit")
        assert np.array_equal(stream.valid, batch.valid)
        ok_vals = batch.values[:, batch.valid]
        rel = np.abs(stream.values[:, stream.valid] - ok_vals) / np.abs(ok_vals)
        worst = max(worst, float(np.max(rel)))
    ok = worst <= 1e-10
    acceptance(6, ok, f"max rel diff over 50 random series {worst:.1e} (tol 1e-10)")
    assert ok


# ---------------------------------------------------------------- 7


BENCH_MODEL = TvArfimaModel(MemoryCurve.cosine_ramp(), ar=(0.8,), sigma=1.0)
BENCH_T = 2**12
BENCH_B = 0.25
BENCH_SEEDS = range(20)


@pytest.fixture(scope="module")
def benchmark_runs():
    """d_hat for L = 1, 2, 3 and raw scalograms at u = 1/2, over 20 seeds."""
    t0 = time.perf_counter()
    grid = default_grid(100)
    sel = (grid >= 0.2 - 1e-12) & (grid <= 0.8 + 1e-12)
    d_true = BENCH_MODEL.d(grid[sel])
    scheme = WeightScheme("kernel", BENCH_B)
    err = {L: [] for L in (1, 2, 3)}
    sig = []
    for seed in BENCH_SEEDS:
        x = simulate(BENCH_MODEL, BENCH_T, seed).values
        for L in (1, 2, 3):
            est, _ = estimate(x, L=L, ell=2, weights=scheme, u_grid=grid, ci=False)
            err[L].append(est.d_hat[sel] - d_true)
        sc = local_scalogram(dwt(x, BANK, 5), scheme, [0.5], range(1, 6))
        sig.append(sc.values[:, 0])
    return {
        "err": {L: np.array(v) for L, v in err.items()},
        "sigma2": np.array(sig),
        "u": grid[sel],
        "elapsed": time.perf_counter() - t0,
    }


def predicted_bias(L):
    """Regression bias implied by the exact local wavelet spectrum, averaged over u."""
    w = np.array(ols_regression_weights(2).w)
    u = np.arange(20, 81) / 100
    pred = [w @ np.log([local_wavelet_spectrum(BENCH_MODEL, x, L + i, BANK) for i in range(3)])
            for x in u]
    return float(np.mean(np.array(pred) - BENCH_MODEL.d(u)))


@pytest.mark.xfail(strict=True, reason="MAE <= 0.15 at L=2 contradicts the model's own "
                   "theoretical regression bias (~0.72); see the decisions ledger")
def test_benchmark_mae_at_L2(benchmark_runs, acceptance):
    mae = float(np.mean(np.abs(benchmark_runs["err"][2])))
    acceptance("7a", mae <= 0.15,
               f"MAE of d_hat on u in [0.2, 0.8] at L=2 = {mae:.3f} (target <= 0.15); "
               f"the exact wavelet spectrum predicts a bias of {predicted_bias(2):.3f} here")
    assert mae <= 0.15


def test_benchmark_bias_matches_theory(benchmark_runs, acceptance):
    """The Monte Carlo error is the deterministic regression bias, not an implementation fault."""
    got = {L: float(np.mean(benchmark_runs["err"][L])) for L in (1, 2, 3)}
    want = {L: predicted_bias(L) for L in (1, 2, 3)}
    ok = all(abs(got[L] - want[L]) <= 0.05 for L in got)
    acceptance("7a*", ok, "mean bias MC vs exact spectrum: " + ", ".join(
        f"L={L} {got[L]:+.3f}/{want[L]:+.3f}" for L in got) + " (tol 0.05)")
    assert ok


def test_benchmark_bias_ordering(benchmark_runs, acceptance):
    b1 = float(np.mean(benchmark_runs["err"][1]))
    b2 = float(np.mean(benchmark_runs["err"][2]))
    ok = b1 > b2
    acceptance("7b", ok, f"mean signed bias L=1 {b1:+.4f} > L=2 {b2:+.4f}")
    assert ok


def test_benchmark_scalogram_variance_grows(benchmark_runs, acceptance):
    var = benchmark_runs["sigma2"].var(axis=0, ddof=1)
    ok = bool(np.all(np.diff(var) > 0)) and benchmark_runs["elapsed"] < 300
    acceptance("7c", ok, "MC variance of sigma2_j(1/2), j=1..5: "
               + ", ".join(f"{v:.3g}" for v in var)
               + f"; study time {benchmark_runs['elapsed']:.1f} s (< 300 s)")
    assert ok


# ---------------------------------------------------------------- 8


def test_ci_coverage(acceptance):
    t0 = time.perf_counter()
    model = TvArfimaModel(0.2)
    scheme = WeightScheme("kernel", 0.1)
    hits = 0
    n = 200
    for seed in range(n):
        x = simulate(model, 2**14, 1000 + seed).values
        est, _ = estimate(x, L=2, ell=2, weights=scheme, u_grid=[0.5])
        hits += bool(est.ci_lo[0] <= 0.2 <= est.ci_hi[0])
    cov = hits / n
    elapsed = time.perf_counter() - t0
    ok = 0.85 <= cov <= 0.99 and elapsed < 600
    acceptance(8, ok, f"95% CI coverage at u=1/2 over {n} seeds = {cov:.3f} "
                      f"(target [0.85, 0.99]), {elapsed:.1f} s")
    assert ok


# ---------------------------------------------------------------- 9


def test_invariance_suite(acceptance):
    rng = np.random.default_rng(9)
    x = simulate(TvArfimaModel(MemoryCurve.cosine_ramp()), 4096, 9).values
    base, _ = estimate(x, ci=False)
    ok_u = np.isfinite(base.d_hat)
    scale_err = 0.0
    for c in (2.0, 1e-3, 37.5, -4.2):
        got, _ = estimate(c * x, ci=False)
        scale_err = max(scale_err, float(np.max(np.abs(got.d_hat[ok_u] - base.d_hat[ok_u]))))
    t = np.arange(1.0, x.size + 1)
    trend, _ = estimate(x + 3.0 - 0.002 * t, ci=False)
    trend_err = float(np.max(np.abs(trend.d_hat[ok_u] - base.d_hat[ok_u])))
    poly_err = 0.0
    for order in (1, 2, 3, 4):
        bank = get_bank(order)
        for deg in range(order):
            coef = rng.standard_normal(deg + 1)
            p = np.polyval(coef, t / t.size) * 100
            for j in range(1, 7):
                # raw filter output, before dwt snaps rounding residue to zero
                taps = bank.filter(j).taps
                raw = np.convolve(p, taps, mode="valid")[:: 2**j]
                poly_err = max(poly_err, float(np.max(np.abs(raw)) / np.max(np.abs(p))))
    ok = scale_err <= 1e-12 and trend_err <= 1e-8 and poly_err <= 1e-10
    acceptance(9, ok, f"scaling {scale_err:.1e} (rounding level, tol 1e-12); linear trend "
                      f"{trend_err:.1e} (tol 1e-8); polynomial residual {poly_err:.1e} "
                      f"(tol 1e-10)")
    assert ok


# ---------------------------------------------------------------- 10


def _pipeline_seconds(kind):
    """Cold timing in a fresh interpreter: tables, CI and all, excluding imports."""
    import subprocess
    import sys

    code = (
        "import time, numpy as np\n"
        "from locmem.estimator import estimate\n"
        "from locmem.simulate import TvArfimaModel, MemoryCurve, simulate\n"
        "x = simulate(TvArfimaModel(MemoryCurve.cosine_ramp(), ar=(0.8,)), 2**15, 1).values\n"
        "t = time.perf_counter()\n"
        f"estimate(x, weights={kind!r})\n"
        "print(time.perf_counter() - t)\n"
    )
    out = subprocess.run([sys.executable, "-c", code], capture_output=True, text=True,
                         check=True)
    return float(out.stdout.strip().splitlines()[-1])


def test_performance(acceptance):
    tk = _pipeline_seconds("kernel")
    tr = _pipeline_seconds("recursive")
    ok = tk <= 5.0 and tr <= 30.0
    acceptance(10, ok, f"T=2^15 full pipeline with intervals: kernel {tk:.2f} s (<= 5 s), "
                       f"recursive {tr:.2f} s (<= 30 s)")
    assert ok
