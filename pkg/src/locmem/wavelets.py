"""Daubechies wavelet filters, per-scale detail filters and Fourier quantities.

Conventions
-----------
``lowpass`` is the orthonormal scaling filter (sum sqrt(2)), front-loaded
(extremal phase). ``highpass[n] = (-1)**n * lowpass[L0 - 1 - n]``.

The detail filter at scale ``j`` is stored as ``taps`` such that

    W[j, k] = sum_s taps[s] * x[2**j * k + L_j - 1 - s]      (0-based x)

which is the decimated "valid" convolution computed by the pyramid.  In the
one-based indexing ``W_{j,k} = sum_t h_{j, 2^j k - t} X_t`` this means
``h_{j, m} = taps[m + L_j]`` for ``-L_j <= m <= -1``, so the coefficient
``k`` reads exactly the samples ``2^j k + 1, ..., 2^j k + L_j``.
"""
from dataclasses import dataclass, field
from functools import lru_cache
from math import comb

import numpy as np

from . import kernels
from .errors import ConfigurationError, ScaleDepthError

# Fourier decay exponents alpha (|psi_hat(xi)| = O(|xi|^-alpha)) of the
# extremal-phase Daubechies wavelets, 1 + the classical Sobolev-type
# regularity estimates. Haar sits on the boundary alpha = 1.
FOURIER_DECAY = {
    1: 1.0,
    2: 1.34,
    3: 1.636,
    4: 1.913,
    5: 2.177,
    6: 2.432,
    7: 2.682,
    8: 2.927,
    9: 3.168,
    10: 3.406,
}

MAX_ORDER = max(FOURIER_DECAY)

PSI_HAT_DEPTH = 25


@lru_cache(maxsize=None)
def daubechies_lowpass(order):
    """Extremal-phase Daubechies scaling filter with ``order`` vanishing moments.

    Built by spectral factorization of the Daubechies polynomial
    ``P(y) = sum_k C(N-1+k, k) y^k``. Returns a read-only array of length
    ``2 * order`` normalized to sum ``sqrt(2)``.
    """
    N = int(order)
    if N < 1 or N > MAX_ORDER:
        raise ConfigurationError(
            f"unsupported Daubechies order {order}; expected 1..{MAX_ORDER}"
        )
    coeffs = [comb(N - 1 + k, k) for k in range(N)]
    q = np.array([1.0])
    if N > 1:
        yroots = np.roots(coeffs[::-1])
        zroots = []
        for y in yroots:
            # y = (2 - z - 1/z) / 4  <=>  z^2 - (2 - 4y) z + 1 = 0
            pair = np.roots([1.0, -(2.0 - 4.0 * y), 1.0])
            zroots.append(pair[np.argmin(np.abs(pair))])
        q = np.real(np.poly(zroots))
    h = np.array([1.0])
    for _ in range(N):
        h = np.convolve(h, [1.0, 1.0])
    h = np.convolve(h, q)
    h = h * (np.sqrt(2.0) / h.sum())
    # front-loaded orientation: the classical D4 starts with (1 + sqrt 3)/(4 sqrt 2)
    if np.sum(np.cumsum(h**2)) < np.sum(np.cumsum(h[::-1] ** 2)):
        h = h[::-1].copy()
    h.setflags(write=False)
    return h


def quadrature_mirror(lowpass):
    """High-pass partner ``g[n] = (-1)^n h[L-1-n]`` of an orthonormal low-pass."""
    lowpass = np.asarray(lowpass, dtype=float)
    signs = (-1.0) ** np.arange(lowpass.size)
    return signs * lowpass[::-1]


@dataclass(frozen=True)
class WaveletSpec:
    """Compactly supported orthonormal wavelet of the Daubechies family.

    ``order`` is the Daubechies order (Haar is order 1); the number of
    vanishing moments ``M`` equals it. ``p`` is the differencing order of the
    analysed model and must not exceed ``M``.
    """

    order: int = 2
    p: int = 0

    def __post_init__(self):
        if not 1 <= int(self.order) <= MAX_ORDER:
            raise ConfigurationError(
                f"unsupported Daubechies order {self.order}; expected 1..{MAX_ORDER}"
            )
        if self.p < 0 or self.p > self.order:
            raise ConfigurationError(
                f"differencing order p={self.p} must satisfy 0 <= p <= M={self.order}"
            )

    @property
    def M(self):
        return int(self.order)

    @property
    def alpha(self):
        return FOURIER_DECAY[int(self.order)]

    @property
    def name(self):
        return "haar" if self.order == 1 else f"db{self.order}"


@dataclass(frozen=True)
class ScaleFilter:
    """Equivalent detail filter of the pyramid at scale ``j``."""

    j: int
    taps: np.ndarray = field(repr=False)

    @property
    def support_length(self):
        return int(self.taps.size)

    def lags(self):
        """Lags ``m`` of ``h_{j,m}`` aligned with ``taps`` (all negative)."""
        return np.arange(self.taps.size) - self.taps.size


def support_length(base_length, j):
    """Length of the scale-``j`` detail filter built from a base filter."""
    return (2**j - 1) * (base_length - 1) + 1


def _upsample(x, factor):
    if factor == 1:
        return np.asarray(x, dtype=float)
    out = np.zeros((len(x) - 1) * factor + 1)
    out[::factor] = x
    return out


def build_bank(spec, max_scale):
    """Detail filters for scales ``1..max_scale`` by filter cascade."""
    if max_scale < 1:
        raise ConfigurationError("max_scale must be >= 1")
    g = daubechies_lowpass(spec.order)
    hp = quadrature_mirror(g)
    filters = []
    approx = np.array([1.0])
    for j in range(1, max_scale + 1):
        step = 2 ** (j - 1)
        taps = np.convolve(approx, _upsample(hp, step))
        taps.setflags(write=False)
        filters.append(ScaleFilter(j, taps))
        approx = np.convolve(approx, _upsample(g, step))
    return filters


def transfer_function(filt, lam):
    """``H_j(lam) = sum_m h_{j,m} exp(-i m lam)`` by direct summation."""
    lam = np.asarray(lam, dtype=float)
    m = filt.lags().astype(float)
    return np.exp(-1j * np.multiply.outer(lam, m)) @ filt.taps


def _symbol(taps, omega):
    """``sum_n taps[n] exp(-i n omega)`` via Horner in ``z = exp(-i omega)``."""
    z = np.exp(-1j * omega)
    out = np.full(np.shape(omega), taps[-1], dtype=complex)
    for c in taps[-2::-1]:
        out = out * z + c
    return out


class WaveletBank:
    """Filters and Fourier-domain evaluators for one wavelet.

    Filters are built lazily and cached; instances are immutable from the
    caller's point of view and safe to share between threads once warmed.

    Parameters
    ----------
    spec : WaveletSpec or int
        Wavelet description, or a Daubechies order.
    """

    def __init__(self, spec=2):
        if not isinstance(spec, WaveletSpec):
            spec = WaveletSpec(int(spec))
        self.spec = spec
        self.lowpass = daubechies_lowpass(spec.order)
        self.highpass = quadrature_mirror(self.lowpass)
        self.highpass.setflags(write=False)
        self._filters = []
        # first moment of the scaling function; corrects the truncated product
        self._phi_mean = float(np.arange(self.lowpass.size) @ self.lowpass / np.sqrt(2.0))

    def __repr__(self):
        return f"WaveletBank({self.spec.name})"

    @property
    def M(self):
        return self.spec.M

    @property
    def alpha(self):
        return self.spec.alpha

    @property
    def base_length(self):
        return int(self.lowpass.size)

    def support_length(self, j):
        return support_length(self.base_length, j)

    def filter(self, j):
        if j < 1:
            raise ConfigurationError("scale index must be >= 1")
        if len(self._filters) < j:
            self._filters = build_bank(self.spec, j)
        return self._filters[j - 1]

    def filters(self, max_scale):
        return [self.filter(j) for j in range(1, max_scale + 1)]

    def n_coeffs(self, T, j):
        """Number ``T_j`` of wavelet coefficients with support inside the sample."""
        return max(0, (int(T) - self.support_length(j)) // 2**j + 1)

    def max_scale(self, T):
        """Deepest scale with at least one complete coefficient."""
        j = 0
        while self.n_coeffs(T, j + 1) >= 1:
            j += 1
        return j

    def check_depth(self, T, J):
        if J < 1 or self.n_coeffs(T, J) < 1:
            raise ScaleDepthError(J, self.max_scale(T), T)

    def transfer(self, j, lam):
        """``H_j`` (up to a unimodular phase) in cascade product form."""
        lam = np.asarray(lam, dtype=float)
        out = _symbol(self.highpass, 2 ** (j - 1) * lam)
        for k in range(j - 1):
            out = out * _symbol(self.lowpass, 2**k * lam)
        return out

    def transfer_sq(self, j, lam):
        """``|H_j(lam)|^2``."""
        return np.abs(self.transfer(j, lam)) ** 2

    def psi_hat(self, xi, depth=PSI_HAT_DEPTH, backend=None):
        """Fourier transform of the mother wavelet by truncated infinite product.

        ``psi_hat(xi) = m1(xi/2) prod_{k=1}^{depth} m0(xi/2^{k+1})`` times the
        first-order phase of the discarded factors.
        """
        s = 1.0 / np.sqrt(2.0)
        return kernels.cascade_product(
            xi, self.highpass * s, self.lowpass * s, depth, self._phi_mean, backend=backend
        )

    def psi_envelope(self, xi_max=2e4, n=200_001):
        """``sup |psi_hat(xi)| (1 + |xi|)^alpha`` estimated on a grid."""
        return _psi_envelope(self.spec.order, float(xi_max), int(n))


@lru_cache(maxsize=None)
def _psi_envelope(order, xi_max, n):
    bank = WaveletBank(order)
    xi = np.linspace(0.0, xi_max, n)
    return float(np.max(np.abs(bank.psi_hat(xi)) * (1.0 + xi) ** bank.alpha))


@lru_cache(maxsize=None)
def get_bank(order=2):
    """Shared, cached :class:`WaveletBank` for a Daubechies order."""
    return WaveletBank(int(order))
