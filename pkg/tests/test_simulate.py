import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import quad
from scipy.special import gamma

from locmem.errors import ConfigurationError, DomainError, TruncationWarning
from locmem.simulate import (
    MemoryCurve,
    TvArfimaModel,
    TvFbmModel,
    TvFgnModel,
    draw_noise,
    fbm_smooth_part,
    fgn_ma_coefficients,
    ma_coefficients,
    simulate,
    simulate_tangent,
)


def arfima_variance(d, sigma=1.0):
    return sigma**2 * gamma(1 - 2 * d) / gamma(1 - d) ** 2


# ---------------------------------------------------------------- curves


def test_cosine_ramp_endpoints():
    c = MemoryCurve.cosine_ramp()
    np.testing.assert_allclose(c([0.0, 1.0]), [0.0, 1 / 3], atol=1e-15)
    assert c.declared_range == pytest.approx((0.0, 1 / 3))
    assert not c.is_constant


def test_piecewise_curve():
    c = MemoryCurve.piecewise([0.1, 0.3], [0.5])
    np.testing.assert_allclose(c([0.2, 0.49, 0.5, 0.9]), [0.1, 0.1, 0.3, 0.3])


def test_coerce():
    assert MemoryCurve.coerce(0.2).is_constant
    assert MemoryCurve.coerce(lambda u: 0.1 * np.asarray(u)).declared_range[1] == pytest.approx(0.1)


# ---------------------------------------------------------------- spectra


def test_arfima_density_closed_form():
    m = TvArfimaModel(0.3, sigma=2.0)
    lam = np.linspace(0.05, np.pi, 20)
    ref = 4.0 / (2 * np.pi) * (2 * np.sin(lam / 2)) ** (-0.6)
    np.testing.assert_allclose(m.spectral_density(0.5, lam), ref, rtol=1e-13)


def test_arfima_density_integrates_to_variance():
    d = 0.2
    m = TvArfimaModel(d)
    val, _ = quad(lambda x: 2 * m.spectral_density(0.5, np.array([x]))[0], 0, np.pi, limit=200)
    assert val == pytest.approx(arfima_variance(d), rel=1e-6)


def test_density_singular_at_zero():
    with pytest.raises(DomainError):
        TvArfimaModel(0.2).spectral_density(0.5, np.array([0.0]))
    assert TvArfimaModel(-0.2).spectral_density(0.5, np.array([0.0]))[0] == 0.0


def test_ma_coefficients_reproduce_density():
    m = TvArfimaModel(-0.2, ar=(0.5,), ma=(0.3,), sigma=1.3)
    a = ma_coefficients(m, 0.5, 8192)
    lam = np.array([0.3, 1.0, 2.5])
    A = np.exp(-1j * np.outer(lam, np.arange(a.size))) @ a
    np.testing.assert_allclose(np.abs(A) ** 2 / (2 * np.pi), m.spectral_density(0.5, lam),
                               rtol=1e-4)


@pytest.mark.parametrize("H", [0.3, 0.5, 0.7, 0.9])
def test_fbm_smooth_part_hurwitz_vs_truncated(H):
    lam = np.linspace(-np.pi, np.pi, 13)
    exact = fbm_smooth_part(lam, H)
    trunc = fbm_smooth_part(lam, H, n_terms=4000)
    np.testing.assert_allclose(exact, trunc, rtol=1e-9)


def test_fgn_half_is_white():
    lam = np.linspace(-np.pi, np.pi, 9)
    f = TvFgnModel(0.5).spectral_density(0.5, lam)
    np.testing.assert_allclose(f, f[0], rtol=1e-12)


def test_fbm_is_integrated_fgn():
    assert TvFbmModel(0.7).p == 1
    assert TvFbmModel(0.7).d(0.5) == pytest.approx(1.2)
    lam = np.array([0.4, 1.1])
    ratio = TvFbmModel(0.7).spectral_density(0.5, lam) / TvFgnModel(0.7).spectral_density(0.5, lam)
    np.testing.assert_allclose(ratio, (2 * np.sin(lam / 2)) ** -2, rtol=1e-12)


def test_fgn_ma_coefficients_reproduce_density():
    H = 0.75
    a = fgn_ma_coefficients(H, 4096)
    k = np.arange(-4096, 4097)
    lam = np.array([0.5, 1.5, 3.0])
    A = np.exp(-1j * np.outer(lam, k)) @ a
    np.testing.assert_allclose(np.abs(A) ** 2 / (2 * np.pi),
                               TvFgnModel(H).spectral_density(0.5, lam), rtol=5e-3)


# ---------------------------------------------------------------- validation


def test_model_validation():
    with pytest.raises(DomainError):
        TvArfimaModel(0.5)
    TvArfimaModel(0.7, p=1)
    with pytest.raises(ConfigurationError):
        TvArfimaModel(0.1, ar=(1.2,))
    with pytest.raises(ConfigurationError):
        TvArfimaModel(0.1, sigma=0.0)
    with pytest.raises(DomainError):
        TvFgnModel(1.0)


# ---------------------------------------------------------------- simulation


def test_noise_kinds():
    for kind in ("gaussian", "uniform", "student"):
        e = draw_noise(1, 200_000, kind)
        assert e.var() == pytest.approx(1.0, rel=0.03)
    e = draw_noise(1, 5, lambda rng, n: np.ones(n))
    assert np.all(e == 1)
    with pytest.raises(ConfigurationError):
        draw_noise(1, 5, "cauchy")


@pytest.mark.filterwarnings("ignore::locmem.errors.TruncationWarning")
def test_simulation_is_deterministic():
    m = TvArfimaModel(MemoryCurve.cosine_ramp(), ar=(0.8,))
    a = simulate(m, 512, 7, n_trunc=256).values
    b = simulate(m, 512, 7, n_trunc=256).values
    assert np.array_equal(a, b)
    assert not np.array_equal(a, simulate(m, 512, 8, n_trunc=256).values)


def test_arfima_sample_variance():
    d = 0.2
    m = TvArfimaModel(d)
    v = np.mean([np.mean(simulate(m, 4096, s).values ** 2) for s in range(12)])
    assert v == pytest.approx(arfima_variance(d), rel=0.06)


def test_time_varying_path_backends_agree():
    from locmem._accel import HAS_NUMBA

    if not HAS_NUMBA:
        pytest.skip("numba not installed")
    m = TvArfimaModel(MemoryCurve.cosine_ramp(), ar=(lambda u: 0.5 * u,), sigma=1.0)
    a = simulate(m, 600, 3, n_trunc=300, backend="numba").values
    b = simulate(m, 600, 3, n_trunc=300, backend="numpy").values
    np.testing.assert_allclose(a, b, rtol=1e-10, atol=1e-12)


def test_time_varying_path_matches_pointwise_filter():
    m = TvArfimaModel(MemoryCurve.cosine_ramp(), ar=(0.4,))
    T, N = 300, 200
    x = simulate(m, T, 5, n_trunc=N).values
    eps = draw_noise(5, T + N)
    for t in (0, 150, T - 1):
        a = ma_coefficients(m, (t + 1) / T, N + 1)
        assert x[t] == pytest.approx(a @ eps[t + N::-1][: N + 1], rel=1e-10)


def test_tangent_shares_noise():
    m = TvArfimaModel(MemoryCurve.cosine_ramp())
    tan = simulate_tangent(m, 0.5, 256, 3, n_trunc=128)
    ref = simulate(m.frozen(0.5), 256, 3, n_trunc=128)
    assert np.array_equal(tan.values, ref.values)
    assert "tangent" in tan.model_tag


def test_integration_order():
    x1 = simulate(TvArfimaModel(1.2, p=1), 400, 2, n_trunc=200).values
    x0 = simulate(TvArfimaModel(0.2), 400, 2, n_trunc=200).values
    np.testing.assert_allclose(np.diff(x1), x0[1:], rtol=1e-9, atol=1e-9)


def test_truncation_warning():
    with pytest.warns(TruncationWarning):
        simulate(TvArfimaModel(0.45), 64, 0, n_trunc=8)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        simulate(TvArfimaModel(0.1), 64, 0, n_trunc=4096)


def test_fgn_autocovariance():
    H = 0.8
    m = TvFgnModel(H)
    f = lambda x: m.spectral_density(0.5, np.array([x]))[0]  # noqa: E731
    var = 2 * quad(f, 0, np.pi, limit=400, points=[1e-6, 1e-3])[0]
    paths = [simulate(m, 4096, s, n_trunc=2048).values for s in range(10)]
    v = np.mean([np.mean(x**2) for x in paths])
    c1 = np.mean([np.mean(x[1:] * x[:-1]) for x in paths])
    assert v == pytest.approx(var, rel=0.1)
    assert c1 / v == pytest.approx(2 ** (2 * H - 1) - 1, abs=0.03)


def test_time_varying_fgn_runs():
    m = TvFgnModel(lambda u: 0.6 + 0.3 * np.asarray(u))
    x = simulate(m, 512, 1, n_trunc=256).values
    assert x.shape == (512,) and np.all(np.isfinite(x))


@settings(max_examples=25, deadline=None)
@given(st.floats(-0.45, 0.45), st.floats(-0.9, 0.9))
def test_ma_coefficients_start_at_sigma(d, phi):
    m = TvArfimaModel(d, ar=(phi,), sigma=1.7)
    a = ma_coefficients(m, 0.5, 3)
    assert a[0] == pytest.approx(1.7)
    assert a[1] == pytest.approx(1.7 * (d + phi))


def test_driver_variance():
    e = draw_noise(123, 2**16)
    se = np.sqrt(2.0 / e.size)
    assert abs(e.var() - 1.0) <= 3 * se


def test_averaged_periodogram_matches_density():
    m = TvArfimaModel(0.2, ar=(0.5,))
    T = 2**14
    acc = np.zeros(T // 2 + 1)
    for seed in range(100):
        x = simulate(m, T, seed).values
        acc += np.abs(np.fft.rfft(x)) ** 2 / (2 * np.pi * T)
    lam = 2 * np.pi * np.arange(acc.size) / T
    sel = lam >= 0.1
    ratio = acc[sel] / 100 / m.spectral_density(0.5, lam[sel])
    assert abs(np.mean(ratio) - 1) <= 0.1


def test_causality_checked_at_construction():
    with pytest.raises(ConfigurationError):
        TvArfimaModel(0.1, ar=(lambda u: 0.5 + 0.6 * np.asarray(u),))


def test_simulated_path_is_array_like():
    from locmem import estimate

    path = simulate(TvArfimaModel(memory=0.2), 1024, seed=3)
    assert len(path) == 1024
    np.testing.assert_array_equal(np.asarray(path), path.values)
    est_path, _ = estimate(path, u_grid=[0.5])
    est_array, _ = estimate(path.values, u_grid=[0.5])
    np.testing.assert_array_equal(est_path.d_hat, est_array.d_hat)
