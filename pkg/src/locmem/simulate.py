"""Locally stationary long-memory models: simulation and local spectra.

Models
------
``TvArfimaModel``
    tvARFIMA(q, d, r): time-varying fractional integration, AR, MA and scale.
``TvFgnModel``
    time-varying fractional Gaussian noise, ``d(u) = H(u) - 1/2``.
``TvFbmModel``
    time-varying fractional Brownian motion (``p = 1``); spectral evaluation only.

Paths are realized as time-varying truncated MA(inf) filters of one noise
stream. The tangent path at ``u`` uses the same stream with every parameter
curve frozen at ``u``, which couples the two sample-wise.
"""
import warnings
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np
from scipy.special import gammaln, zeta

from . import kernels
from .errors import ConfigurationError, DomainError, TruncationWarning

DEFAULT_TRUNCATION = 4096
CHECK_GRID = np.linspace(0.0, 1.0, 201)


# --------------------------------------------------------------------------
# parameter curves


def _as_function(value):
    if callable(value):
        return value
    c = float(value)
    return lambda u: np.full(np.shape(u), c)


def _eval(fn, u):
    u_arr = np.asarray(u, dtype=float)
    out = np.asarray(fn(u_arr), dtype=float)
    if out.shape != u_arr.shape:
        out = np.broadcast_to(out, u_arr.shape).copy()
    return out


@dataclass(frozen=True)
class MemoryCurve:
    """Rescaled-time memory parameter ``u -> d(u)``.

    ``evaluator`` must accept numpy arrays. ``declared_range`` is filled from
    a 201-point grid when omitted.
    """

    evaluator: Callable
    declared_range: Optional[tuple] = None
    lipschitz_hint: float = 0.0
    label: str = "custom"

    def __post_init__(self):
        if self.declared_range is None:
            vals = _eval(self.evaluator, CHECK_GRID)
            object.__setattr__(self, "declared_range", (float(vals.min()), float(vals.max())))

    def __call__(self, u):
        return _eval(self.evaluator, u)

    @property
    def is_constant(self):
        lo, hi = self.declared_range
        return lo == hi

    @classmethod
    def constant(cls, d):
        d = float(d)
        return cls(lambda u: np.full(np.shape(u), d), (d, d), 0.0, f"constant({d:g})")

    @classmethod
    def cosine_ramp(cls, amplitude=1.0 / 3.0):
        """``d(u) = amplitude * (1 - cos(pi u / 2))``, the benchmark memory curve."""
        a = float(amplitude)
        return cls(
            lambda u: a * (1.0 - np.cos(np.pi * np.asarray(u) / 2.0)),
            (0.0, a),
            a * np.pi / 2.0,
            f"cosine_ramp({a:g})",
        )

    @classmethod
    def piecewise(cls, values, breaks):
        """Piecewise-constant curve: ``values[i]`` on ``[breaks[i-1], breaks[i])``."""
        values = np.asarray(values, dtype=float)
        breaks = np.asarray(breaks, dtype=float)
        if values.size != breaks.size + 1:
            raise ConfigurationError("piecewise curve needs len(values) == len(breaks) + 1")
        return cls(
            lambda u: values[np.searchsorted(breaks, np.asarray(u), side="right")],
            (float(values.min()), float(values.max())),
            np.inf,
            "piecewise",
        )

    @classmethod
    def coerce(cls, value):
        if isinstance(value, MemoryCurve):
            return value
        if callable(value):
            return cls(value)
        return cls.constant(value)


def _abs_one_minus_exp(lam):
    return 2.0 * np.abs(np.sin(np.asarray(lam, dtype=float) / 2.0))


def _memory_factor(lam, d):
    """``|1 - exp(-i lam)|^{-2d}`` with the limit at ``lam = 0`` for ``d <= 0``."""
    lam = np.asarray(lam, dtype=float)
    d = np.broadcast_to(np.asarray(d, dtype=float), lam.shape)
    zero = lam == 0.0
    if np.any(zero & (d > 0)):
        raise DomainError("spectral density is singular at lam = 0 when d(u) > 0")
    with np.errstate(divide="ignore"):
        out = _abs_one_minus_exp(lam) ** (-2.0 * d)
    out = np.where(zero, np.where(d == 0.0, 1.0, 0.0), out)
    return out


# --------------------------------------------------------------------------
# models


@dataclass(frozen=True)
class TvArfimaModel:
    """Time-varying ARFIMA(q, d, r) with differencing order ``p``.

    The local transfer function is the one of a causal ARFIMA(q, d(u)-p, r)
    with innovation standard deviation ``sigma(u)``; the generalized spectral
    density is ``|1-e^{-i lam}|^{-2d(u)} sigma(u)^2 / (2 pi)
    |theta(e^{-i lam})|^2 / |phi(e^{-i lam})|^2``.

    Parameters
    ----------
    memory : MemoryCurve, float or callable
    ar, ma : sequence of float or callable
        AR coefficients ``phi_k(u)`` and MA coefficients ``theta_k(u)``.
    sigma : float or callable
        Innovation scale, positive.
    p : int
        Differencing order.
    """

    memory: object = 0.0
    ar: tuple = ()
    ma: tuple = ()
    sigma: object = 1.0
    p: int = 0
    beta: float = field(default=2.0, init=False)
    tag: str = field(default="tvarfima", init=False)

    def __post_init__(self):
        object.__setattr__(self, "memory", MemoryCurve.coerce(self.memory))
        object.__setattr__(self, "ar", tuple(self.ar))
        object.__setattr__(self, "ma", tuple(self.ma))
        if self.p < 0:
            raise ConfigurationError("differencing order p must be >= 0")
        d = self.d(CHECK_GRID)
        if np.max(d) - self.p >= 0.5:
            raise DomainError(
                f"max d(u) = {np.max(d):.4g} must be < p + 1/2 = {self.p + 0.5}"
            )
        if np.any(self.sigma_at(CHECK_GRID) <= 0):
            raise ConfigurationError("sigma(u) must be positive")
        if self.ar:
            phi = self.phi(CHECK_GRID)
            for row, u in zip(phi, CHECK_GRID):
                # roots of 1 - sum phi_k z^k outside the disk <=> roots of the
                # reciprocal z^q - sum phi_k z^{q-k} strictly inside
                roots = np.roots(np.r_[1.0, -row])
                if roots.size and np.max(np.abs(roots)) >= 1.0:
                    raise ConfigurationError(
                        f"AR polynomial has a root in the closed unit disk at u={u:.3f}"
                    )

    @property
    def q(self):
        return len(self.ar)

    @property
    def r(self):
        return len(self.ma)

    def d(self, u):
        return self.memory(u)

    def phi(self, u):
        u = np.atleast_1d(np.asarray(u, dtype=float))
        return np.stack([_eval(_as_function(c), u) for c in self.ar], axis=-1) if self.ar \
            else np.zeros(u.shape + (0,))

    def theta(self, u):
        u = np.atleast_1d(np.asarray(u, dtype=float))
        return np.stack([_eval(_as_function(c), u) for c in self.ma], axis=-1) if self.ma \
            else np.zeros(u.shape + (0,))

    def sigma_at(self, u):
        return _eval(_as_function(self.sigma), u)

    def is_constant(self):
        grid = CHECK_GRID
        arrays = [self.d(grid), self.sigma_at(grid), self.phi(grid), self.theta(grid)]
        return all(np.ptp(a, axis=0).max() == 0.0 if a.size else True for a in arrays)

    def frozen(self, u):
        """Tangent model: every parameter curve fixed at rescaled time ``u``."""
        u = float(u)
        return TvArfimaModel(
            memory=float(self.d(u)),
            ar=tuple(float(c) for c in self.phi(u)[0]),
            ma=tuple(float(c) for c in self.theta(u)[0]),
            sigma=float(self.sigma_at(u)),
            p=self.p,
        )

    def smooth_part(self, u, lam):
        lam = np.asarray(lam, dtype=float)
        z = np.exp(-1j * lam)
        num = np.ones_like(z)
        for k, th in enumerate(self.theta(u)[0], start=1):
            num = num + th * z**k
        den = np.ones_like(z)
        for k, ph in enumerate(self.phi(u)[0], start=1):
            den = den - ph * z**k
        s = float(self.sigma_at(u))
        return s**2 / (2.0 * np.pi) * np.abs(num) ** 2 / np.abs(den) ** 2

    def spectral_density(self, u, lam):
        return _memory_factor(lam, float(self.d(u))) * self.smooth_part(u, lam)


def fbm_smooth_part(lam, H, n_terms=None):
    """Smooth factor of the FBM increment spectrum.

    ``|2 sin(lam/2)/lam|^{2H+1} + |2 sin(lam/2)|^{2H+1} sum_{k != 0} |lam + 2k pi|^{-2H-1}``.

    The lattice sum is evaluated exactly with Hurwitz zeta functions. With
    ``n_terms`` the sum is instead truncated at ``|k| <= n_terms`` and an
    integral-comparison estimate of the remainder is added.
    """
    lam = np.asarray(lam, dtype=float)
    if np.any(np.abs(lam) > np.pi):
        raise DomainError("lam must lie in [-pi, pi]")
    s = 2.0 * H + 1.0
    two_sin = _abs_one_minus_exp(lam)
    with np.errstate(invalid="ignore", divide="ignore"):
        first = np.where(lam == 0.0, 1.0, np.abs(two_sin / lam) ** s)
    if n_terms is None:
        x = lam / (2.0 * np.pi)
        lattice = (2.0 * np.pi) ** (-s) * (zeta(s, 1.0 + x) + zeta(s, 1.0 - x))
    else:
        k = np.arange(1, int(n_terms) + 1, dtype=float)
        lattice = np.zeros_like(lam)
        flat = lattice.reshape(-1)
        for i, lm in enumerate(lam.reshape(-1)):
            flat[i] = np.sum((2 * np.pi * k + lm) ** -s) + np.sum((2 * np.pi * k - lm) ** -s)
            edge = 2 * np.pi * (n_terms + 0.5)
            flat[i] += ((edge + lm) ** (1 - s) + (edge - lm) ** (1 - s)) / (2 * np.pi * (s - 1))
    return first + two_sin**s * lattice


@dataclass(frozen=True)
class TvFgnModel:
    """Time-varying fractional Gaussian noise with Hurst curve ``H(u)`` in (0, 1)."""

    hurst: object = 0.7
    p: int = field(default=0, init=False)
    tag: str = field(default="tvfgn", init=False)

    def __post_init__(self):
        fn = _as_function(self.hurst)
        object.__setattr__(self, "_H", fn)
        h = _eval(fn, CHECK_GRID)
        if np.any(h <= 0.0) or np.any(h >= 1.0):
            raise DomainError("Hurst curve must take values in (0, 1)")

    @property
    def beta(self):
        return float(min(2.0, 2.0 * np.min(self.H(CHECK_GRID)) + 1.0))

    def H(self, u):
        return _eval(self._H, u)

    def d(self, u):
        return self.H(u) - 0.5

    def is_constant(self):
        return np.ptp(self.H(CHECK_GRID)) == 0.0

    def frozen(self, u):
        return TvFgnModel(float(self.H(u)))

    def smooth_part(self, u, lam):
        return fbm_smooth_part(lam, float(self.H(u)))

    def spectral_density(self, u, lam):
        return _memory_factor(lam, float(self.d(u))) * self.smooth_part(u, lam)


@dataclass(frozen=True)
class TvFbmModel:
    """Time-varying fractional Brownian motion: ``p = 1``, ``d(u) = H(u) + 1/2``.

    Only spectral evaluation is provided.
    """

    hurst: object = 0.7
    p: int = field(default=1, init=False)
    tag: str = field(default="tvfbm", init=False)

    def __post_init__(self):
        fn = _as_function(self.hurst)
        object.__setattr__(self, "_H", fn)
        h = _eval(fn, CHECK_GRID)
        if np.any(h <= 0.0) or np.any(h >= 1.0):
            raise DomainError("Hurst curve must take values in (0, 1)")

    @property
    def beta(self):
        return float(min(2.0, 2.0 * np.min(self.H(CHECK_GRID)) + 1.0))

    def H(self, u):
        return _eval(self._H, u)

    def d(self, u):
        return self.H(u) + 0.5

    def is_constant(self):
        return np.ptp(self.H(CHECK_GRID)) == 0.0

    def frozen(self, u):
        return TvFbmModel(float(self.H(u)))

    def smooth_part(self, u, lam):
        return fbm_smooth_part(lam, float(self.H(u)))

    def spectral_density(self, u, lam):
        return _memory_factor(lam, float(self.d(u))) * self.smooth_part(u, lam)


def local_spectral_density(model, u, lam):
    """Generalized local spectral density ``f(u, lam)`` of ``model``."""
    return model.spectral_density(float(u), lam)


# --------------------------------------------------------------------------
# simulation


@dataclass(frozen=True)
class SimulatedPath:
    values: np.ndarray = field(repr=False)
    T: int
    seed: int
    model_tag: str

    def __array__(self, dtype=None, copy=None):
        return self.values if dtype is None else self.values.astype(dtype, copy=False)

    def __len__(self):
        return self.T


def draw_noise(seed, n, noise="gaussian"):
    """Unit-variance i.i.d. innovations.

    ``noise`` is ``"gaussian"``, ``"uniform"``, ``"student"`` (t with 5 degrees
    of freedom, rescaled) or a callable ``(rng, n) -> array``.
    """
    rng = np.random.default_rng(seed)
    if callable(noise):
        eps = np.asarray(noise(rng, n), dtype=float)
        if eps.shape != (n,):
            raise ConfigurationError("custom noise must return an array of length n")
        return eps
    if noise == "gaussian":
        return rng.standard_normal(n)
    if noise == "uniform":
        return rng.uniform(-np.sqrt(3.0), np.sqrt(3.0), n)
    if noise == "student":
        return rng.standard_t(5, n) / np.sqrt(5.0 / 3.0)
    raise ConfigurationError(f"unknown noise kind {noise!r}")


def ma_coefficients(model, u, n_taps):
    """Leading MA(inf) coefficients of the p-th increment of the tangent model at ``u``.

    For tvARFIMA these are ``sigma(u)`` times the coefficients of
    ``(1-z)^{-(d(u)-p)} theta_u(z) / phi_u(z)``.
    """
    if n_taps < 1:
        raise ConfigurationError("n_taps must be >= 1")
    delta = float(model.d(u)) - model.p
    if delta >= 0.5:
        raise DomainError(
            f"d(u) - p = {delta:.4g} >= 1/2: the increment is not square summable"
        )
    a = kernels.frac_arma_coefficients(delta, model.phi(u)[0], model.theta(u)[0], n_taps)
    return float(model.sigma_at(u)) * a


def _tail_fraction(a, delta):
    """Share of variance beyond the last tap, from the power-law tail ``k^(delta-1)``."""
    N = a.size - 1
    head = float(np.sum(a**2))
    if head == 0.0:
        return 0.0
    tail = a[-1] ** 2 * N / max(1.0 - 2.0 * delta, 1e-12)
    return tail / (head + tail)


def _integrate(x, p):
    for _ in range(p):
        x = np.cumsum(x)
    return x


def simulate_tvarfima(model, T, seed, noise="gaussian", n_trunc=DEFAULT_TRUNCATION,
                      backend=None, tail_tol=0.1):
    """Simulate ``X_{1,T}, ..., X_{T,T}`` of a tvARFIMA model.

    The p-th increment is ``sum_{k=0}^{N} a_k(t/T) eps_{t-k}`` with pre-sample
    noise drawn from the same stream; it is then integrated ``p`` times from
    zero. A :class:`TruncationWarning` is issued when the dropped MA tail is
    estimated to carry more than ``tail_tol`` of the variance.
    """
    T = int(T)
    N = int(n_trunc)
    if T < 1:
        raise ConfigurationError("T must be >= 1")
    if N < 0:
        raise ConfigurationError("n_trunc must be >= 0")
    u = np.arange(1, T + 1) / T
    delta = model.d(u) - model.p
    if np.max(delta) >= 0.5:
        raise DomainError("d(u) - p must stay below 1/2")
    u_worst = float(u[np.argmax(delta)])
    frac = _tail_fraction(ma_coefficients(model, u_worst, N + 1), float(np.max(delta)))
    if frac > tail_tol:
        warnings.warn(
            f"MA truncation N={N} drops ~{frac:.1%} of the variance at u={u_worst:.3f}",
            TruncationWarning,
            stacklevel=2,
        )
    eps = draw_noise(seed, T + N, noise)
    if model.is_constant():
        a = ma_coefficients(model, u[0], N + 1)
        x = np.convolve(eps, a, mode="valid")
    else:
        x = kernels.tvarfima_ma(
            delta, model.phi(u), model.theta(u), model.sigma_at(u), eps, N, backend=backend
        )
    return SimulatedPath(_integrate(x, model.p), T, seed, model.tag)


def fgn_ma_coefficients(H, n_side, n_fft=2**16, n_smooth=256):
    """Two-sided MA coefficients ``a_{-n}, ..., a_n`` of stationary FGN(H).

    ``sum_k a_k e^{-i k lam} = sqrt(2 pi f(lam))`` (real and even), built as the
    convolution of the exact Fourier coefficients of ``|1 - e^{-i lam}|^{-d}``
    with FFT coefficients of the smooth factor ``sqrt(2 pi f_FBM)``.
    """
    d = H - 0.5
    c = d / 2.0
    n_rho = n_side + n_smooth
    k = np.arange(n_rho, dtype=float)
    rho = np.empty(n_rho + 1)
    rho[0] = np.exp(gammaln(1.0 - 2.0 * c) - 2.0 * gammaln(1.0 - c))
    rho[1:] = rho[0] * np.cumprod((k + c) / (k + 1.0 - c))
    rho_sym = np.r_[rho[:0:-1], rho]
    lam = 2.0 * np.pi * np.fft.fftfreq(n_fft)
    g = np.sqrt(2.0 * np.pi * fbm_smooth_part(lam, H))
    gk = np.fft.ifft(g).real
    g_sym = np.r_[gk[-n_smooth:], gk[: n_smooth + 1]]
    full = np.convolve(rho_sym, g_sym, mode="valid")
    return full


def simulate_tvfgn(model, T, seed, noise="gaussian", n_trunc=DEFAULT_TRUNCATION,
                   backend=None, n_grid=65):
    """Simulate tvFGN with a two-sided MA filter of half-width ``n_trunc``.

    Coefficients are tabulated on ``n_grid`` Hurst values spanning the curve
    and linearly interpolated in ``H`` for each ``t``.
    """
    T = int(T)
    N = int(n_trunc)
    u = np.arange(1, T + 1) / T
    h = model.H(u)
    eps = draw_noise(seed, T + 2 * N, noise)
    if model.is_constant():
        a = fgn_ma_coefficients(float(h[0]), N)
        x = np.convolve(eps, a, mode="valid")
    else:
        grid = np.linspace(h.min(), h.max(), n_grid)
        table = np.stack([fgn_ma_coefficients(float(hg), N) for hg in grid])
        pos = (h - grid[0]) / (grid[1] - grid[0])
        idx = np.clip(np.floor(pos).astype(np.int64), 0, n_grid - 2)
        frac = pos - idx
        x = kernels.tabulated_ma(table, idx, frac, eps, backend=backend)
    return SimulatedPath(x, T, seed, model.tag)


def simulate(model, T, seed, **kwargs):
    """Dispatch on the model family."""
    if isinstance(model, TvArfimaModel):
        return simulate_tvarfima(model, T, seed, **kwargs)
    if isinstance(model, TvFgnModel):
        return simulate_tvfgn(model, T, seed, **kwargs)
    raise ConfigurationError(f"simulation is not available for {type(model).__name__}")


def simulate_tangent(model, u, T, seed, **kwargs):
    """Stationary tangent path at ``u`` driven by the same noise stream."""
    path = simulate(model.frozen(u), T, seed, **kwargs)
    return replace(path, model_tag=f"{model.tag}@tangent({float(u):g})")
