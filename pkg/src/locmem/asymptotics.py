"""Numerical evaluation of the large-sample limit objects of the estimator.

* ``K_of_d``: ``int |xi|^{-2d} |psi_hat(xi)|^2 dxi`` over the real line;
* ``local_wavelet_spectrum``: ``sigma_j^2(u) = int |H_j|^2 f(u, .)`` over ``[-pi, pi]``;
* ``cross_spectral_D``: the lattice sums ``D_{m,v}(lam; d)`` describing the
  between-scale covariance of wavelet coefficients of a fractional process;
* ``sigma_matrix`` and ``estimator_variance``: the limit covariance of the
  normalized scalograms and the limit variance of the memory estimator.

All integrals over unbounded or singular ranges are split into octaves with
composite Gauss-Legendre panels whose count follows the oscillation of the
integrand. Contributions below the first octave are added analytically from the
``xi^{2M}`` behaviour of ``psi_hat`` at zero; the part above the last octave is
extrapolated from the geometric decay of octave integrals.
"""
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.integrate import simpson

from .errors import ConfigurationError, DomainError, PrecisionError
from .wavelets import WaveletBank, get_bank


@dataclass(frozen=True)
class AsymptoticConfig:
    """Quadrature and truncation settings.

    Parameters
    ----------
    gl_nodes : int
        Gauss-Legendre nodes per panel.
    refine : int
        Multiplier on every panel count (2 doubles all node counts).
    octave_lo, octave_hi : int
        ``K(d)`` is integrated over ``[pi 2^lo, pi 2^{hi+1}]`` by quadrature.
    graded_levels : int
        Dyadic levels of the graded mesh toward zero on ``[0, pi]``.
    lattice_terms : int
        Initial truncation ``|l| <= n`` of the lattice sums.
    lattice_max : int
        Largest truncation tried before giving up.
    lattice_tol : float
        Admissible estimated truncation error of lattice sums and their
        integrals, relative to the quantity itself. Integrals of ``|D|^2``
        are extrapolated (Aitken delta-squared over halved truncations)
        before the test.
    """

    gl_nodes: int = 32
    refine: int = 1
    octave_lo: int = -30
    octave_hi: int = 14
    graded_levels: int = 40
    lattice_terms: int = 64
    lattice_max: int = 4096
    lattice_tol: float = 1e-5


DEFAULT_CONFIG = AsymptoticConfig()


@lru_cache(maxsize=None)
def _legendre(n):
    x, w = np.polynomial.legendre.leggauss(n)
    return x, w


def gl_panels(a, b, n_panels, n_nodes=32):
    """Nodes and weights of composite Gauss-Legendre on ``[a, b]``."""
    x0, w0 = _legendre(n_nodes)
    edges = np.linspace(a, b, int(n_panels) + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[:-1] + edges[1:])
    x = (mid[:, None] + half[:, None] * x0[None, :]).ravel()
    w = (half[:, None] * w0[None, :]).ravel()
    return x, w


def _as_bank(bank):
    if isinstance(bank, WaveletBank):
        return bank
    return get_bank(2 if bank is None else int(bank))


def _check_K_domain(d, bank):
    lo = 0.5 - bank.alpha
    hi = bank.M + 0.5
    if not lo < d < hi:
        raise DomainError(f"d={d:g} outside ({lo:g}, {hi:g}) for {bank.spec.name}")


# --------------------------------------------------------------------------
# K(d)


class _KQuadrature:
    """``|psi_hat|^2`` tabulated on octave quadrature nodes, reused for every ``d``."""

    def __init__(self, bank, config):
        self.bank = bank
        self.config = config
        wiggle = (bank.base_length - 1) / 8.0
        xs, ws, owners = [], [], []
        for n in range(config.octave_lo, config.octave_hi + 1):
            panels = config.refine * max(1, int(np.ceil(2.0**n * wiggle)))
            x, w = gl_panels(np.pi * 2.0**n, np.pi * 2.0 ** (n + 1), panels, config.gl_nodes)
            xs.append(x)
            ws.append(w)
            owners.append(np.full(x.size, n - config.octave_lo))
        self.xi = np.concatenate(xs)
        self.w = np.concatenate(ws)
        self.owner = np.concatenate(owners)
        self.n_oct = config.octave_hi - config.octave_lo + 1
        self.psi2 = np.abs(bank.psi_hat(self.xi)) ** 2
        self.log_xi = np.log(self.xi)
        a = np.pi * 2.0**config.octave_lo
        self.a = a
        self.psi2_a = float(np.abs(bank.psi_hat(a)) ** 2)

    def __call__(self, d):
        vals = self.w * np.exp(-2.0 * d * self.log_xi) * self.psi2
        octs = np.bincount(self.owner, weights=vals, minlength=self.n_oct)
        M = self.bank.M
        e = 2 * M - 2.0 * d + 1.0
        c = self.psi2_a / self.a ** (2 * M)
        head = c * self.a**e / e
        tail = _geometric_tail(octs)
        return 2.0 * (head + octs.sum() + tail)


def _geometric_tail(octs):
    """Extrapolate the sum of octave integrals beyond the last one.

    The per-octave ratio is estimated from two pairs of consecutive octaves,
    which smooths the period-two modulation of lacunary products.
    """
    num = octs[-1] + octs[-2]
    den = octs[-3] + octs[-4]
    if den <= 0 or num <= 0:
        return 0.0
    r = np.sqrt(num / den)
    if r >= 1.0:
        raise PrecisionError("octave integrals do not decay; K(d) tail diverges")
    return float(octs[-1] * r / (1.0 - r))


@lru_cache(maxsize=32)
def _k_quadrature(order, config):
    return _KQuadrature(get_bank(order), config)


def K_of_d(d, bank=None, config=DEFAULT_CONFIG):
    """``K(d) = int_R |xi|^{-2d} |psi_hat(xi)|^2 dxi`` for ``1/2 - alpha < d < M + 1/2``."""
    bank = _as_bank(bank)
    _check_K_domain(d, bank)
    return float(_k_quadrature(bank.spec.order, config)(float(d)))


def K_of_d_reference(d, bank=None, octave_lo=-24, octave_hi=15, per_wiggle=48):
    """Independent evaluation of ``K(d)`` by composite Simpson on binary octaves.

    Uses octaves ``[2^n, 2^{n+1}]`` (not aligned with multiples of ``pi``), a
    different upper cut-off and a log-log fit of the last octaves for the tail.
    Slower than :func:`K_of_d`; intended as a cross-check.
    """
    bank = _as_bank(bank)
    _check_K_domain(d, bank)
    octs = []
    for n in range(octave_lo, octave_hi + 1):
        a, b = 2.0**n, 2.0 ** (n + 1)
        wiggles = max(1.0, b * (bank.base_length - 1) / (4.0 * np.pi))
        npts = int(2 * np.ceil(wiggles * per_wiggle / 2.0)) + 1
        npts = max(npts, 257)
        total = 0.0
        # split long octaves in blocks of ~2^20 points to bound memory
        n_blocks = max(1, npts // 2**20)
        edges = np.linspace(a, b, n_blocks + 1)
        per = 2 * ((npts // n_blocks) // 2) + 1
        for lo, hi in zip(edges[:-1], edges[1:]):
            x = np.linspace(lo, hi, per)
            y = x ** (-2.0 * d) * np.abs(bank.psi_hat(x)) ** 2
            total += simpson(y, x=x)
        octs.append(total)
    octs = np.asarray(octs)
    a = 2.0**octave_lo
    M = bank.M
    e = 2 * M - 2.0 * d + 1.0
    head = np.abs(bank.psi_hat(a)) ** 2 / a ** (2 * M) * a**e / e
    # tail: fit log(octave integral) linearly in n over the last six octaves
    n_fit = np.arange(6)
    slope = np.polyfit(n_fit, np.log(octs[-6:]), 1)[0]
    r = np.exp(slope)
    if r >= 1.0:
        raise PrecisionError("octave integrals do not decay")
    tail = octs[-1] * r / (1.0 - r)
    return float(2.0 * (head + octs.sum() + tail))


# --------------------------------------------------------------------------
# local wavelet spectrum


def graded_nodes(j, config=DEFAULT_CONFIG, wiggle_base=4):
    """Quadrature on ``[0, pi]`` refined geometrically toward zero.

    Octave ``[pi 2^{-n-1}, pi 2^{-n}]`` receives ``ceil(2^{j-n} (L0-1)/8)``
    panels, matching the oscillation of ``|H_j|^2``.
    """
    xs, ws = [], []
    for n in range(config.graded_levels + j):
        panels = config.refine * max(1, int(np.ceil(2.0 ** (j - n) * (wiggle_base - 1) / 8.0)))
        x, w = gl_panels(np.pi * 2.0 ** (-n - 1), np.pi * 2.0**-n, panels, config.gl_nodes)
        xs.append(x)
        ws.append(w)
    return np.concatenate(xs), np.concatenate(ws)


def local_wavelet_spectrum(model, u, j, bank=None, config=DEFAULT_CONFIG):
    """``sigma_j^2(u) = int_{-pi}^{pi} |H_j(lam)|^2 f(u, lam) dlam``.

    Raises
    ------
    DomainError
        If ``d(u) >= M + 1/2``: the integrand is not integrable at zero.
    """
    bank = _as_bank(bank)
    if j < 1:
        raise ConfigurationError("scale must be >= 1")
    d = float(model.d(u))
    if d >= bank.M + 0.5:
        raise DomainError(f"d(u)={d:g} >= M + 1/2 = {bank.M + 0.5}: sigma_j^2 diverges")
    lam, w = graded_nodes(j, config, bank.base_length)
    vals = bank.transfer_sq(j, lam) * model.spectral_density(u, lam)
    # analytic piece on [0, a]: the integrand behaves like c lam^{2M - 2d}
    a = np.pi * 2.0 ** (-(config.graded_levels + j))
    e = 2 * bank.M - 2.0 * d + 1.0
    fa = float(bank.transfer_sq(j, np.array([a]))[0] * model.spectral_density(u, np.array([a]))[0])
    head = fa * a / e
    return float(2.0 * (w @ vals + head))


# --------------------------------------------------------------------------
# cross-spectral lattice sums


class _LatticeTable:
    """``psi_hat`` products on ``lam + 2 l pi``, ``|l| <= n``, for fixed nodes."""

    def __init__(self, bank, m, lam, n_terms):
        self.m = m
        self.n_terms = n_terms
        l = np.arange(-n_terms, n_terms + 1, dtype=float)
        self.xi = lam[:, None] + 2.0 * np.pi * l[None, :]
        self.log_abs = np.log(np.abs(self.xi))
        self.prod = np.conj(bank.psi_hat(self.xi)) * bank.psi_hat(self.xi * 2.0**-m)
        self.prod *= 2.0 ** (-m / 2.0)

    def terms(self, d, v):
        t = np.exp(-2.0 * d * self.log_abs) * self.prod
        if v:
            t = t * np.exp(-1j * v * 2.0**-self.m * self.xi)
        return t

    def D(self, d, v):
        """Full sum and the sum restricted to ``|l| <= n/2``."""
        t = self.terms(d, v)
        n, h = self.n_terms, self.n_terms // 2
        return t.sum(axis=1), t[:, n - h:n + h + 1].sum(axis=1)


def lattice_tail_bound(d, m, n_terms, bank):
    """Certified bound on the neglected ``|l| > n`` part of ``D_{m,v}``, ``|lam| <= pi``.

    Uses ``|psi_hat(xi)| <= C (1 + |xi|)^{-alpha}`` with ``C`` from a sampled
    envelope, so that each term is at most ``C^2 2^{m alpha} |xi|^{-2d-2alpha}``.
    The bound is pessimistic by orders of magnitude; adaptivity relies on the
    observed convergence instead (see :func:`cross_spectral_D`).
    """
    s = 2.0 * d + 2.0 * bank.alpha
    if s <= 1.0:
        return np.inf
    C = bank.psi_envelope()
    return 2.0 * C**2 * 2.0 ** (m * bank.alpha) * (2 * np.pi) ** (-s) \
        * (n_terms - 0.5) ** (1 - s) / (s - 1)


def _extrapolation_factor(d, bank):
    """``1 / (2^{s-1} - 1)``: remaining tail per observed change when halving ``n``.

    With terms of size ``|l|^{-s}`` the truncation error behaves like
    ``n^{1-s}``, so the error left at ``n`` is the change from ``n/2`` to ``n``
    times this factor.
    """
    s = 2.0 * d + 2.0 * bank.alpha
    return 1.0 / (2.0 ** (s - 1.0) - 1.0)


def cross_spectral_D(lam, m, v, d, bank=None, config=DEFAULT_CONFIG):
    """``D_{m,v}(lam; d) = 2^{-m/2} sum_l |xi_l|^{-2d} e^{-i v 2^{-m} xi_l}
    conj(psi_hat(xi_l)) psi_hat(2^{-m} xi_l)`` with ``xi_l = lam + 2 l pi``.

    The truncation ``|l| <= n`` is doubled from ``config.lattice_terms`` until the
    estimated remaining tail is below ``config.lattice_tol * max |D|``.

    Raises
    ------
    PrecisionError
        If ``config.lattice_max`` terms do not reach the tolerance.
    """
    bank = _as_bank(bank)
    _check_K_domain(d, bank)
    if m < 0 or not 0 <= v < 2**m:
        raise ConfigurationError("need m >= 0 and 0 <= v < 2^m")
    lam = np.atleast_1d(np.asarray(lam, dtype=float))
    if np.any(np.abs(lam) > np.pi):
        raise ConfigurationError("lam must lie in [-pi, pi]")
    factor = _extrapolation_factor(d, bank)
    n = config.lattice_terms
    while True:
        full, half = _LatticeTable(bank, m, lam, n).D(d, v)
        err = factor * float(np.max(np.abs(full - half)))
        if err <= config.lattice_tol * max(float(np.max(np.abs(full))), 1e-300):
            return full
        if 2 * n > config.lattice_max:
            raise PrecisionError(
                f"lattice sum for d={d:g}, m={m} not converged with {n} terms "
                f"(estimated tail {err:.2e}); raise lattice_max"
            )
        n *= 2


class _DIntegrals:
    """``int_{-pi}^{pi} |D_{m,v}(lam; d)|^2 dlam`` with tables reused across ``d``.

    ``|D|^2`` is even and smooth on ``(0, pi]`` with a finite limit at zero, so
    a graded mesh of ``levels`` dyadic octaves plus a constant piece on the
    last interval suffices.
    """

    levels = 16

    def __init__(self, bank, config):
        self.bank = bank
        self.config = config
        xs, ws = [], []
        for n in range(self.levels):
            panels = config.refine * (4 if n == 0 else 2 if n == 1 else 1)
            x, w = gl_panels(np.pi * 2.0 ** (-n - 1), np.pi * 2.0**-n, panels, 16)
            xs.append(x)
            ws.append(w)
        self.a = np.pi * 2.0 ** (-self.levels)
        self.lam = np.concatenate(xs + [np.array([self.a])])
        self.w = np.concatenate(ws + [np.array([self.a])])
        self._tables = {}
        self._cache = {}

    def _table(self, m, n):
        key = (m, n)
        if key not in self._tables:
            self._tables[key] = _LatticeTable(self.bank, m, self.lam, n)
        return self._tables[key]

    def _levels(self, m, v, d, n):
        """Integrals truncated at ``|l| <= n, n/2, n/4, n/8``."""
        t = self._table(m, n).terms(d, v)
        out = []
        for k in (n, n // 2, n // 4, n // 8):
            s = t[:, n - k:n + k + 1].sum(axis=1)
            out.append(2.0 * float(self.w @ np.abs(s) ** 2))
        return out

    @staticmethod
    def _aitken(a, b, c):
        """Delta-squared limit of ``c, b, a`` (coarse to fine), or ``None``.

        Only used when the successive changes shrink with a common sign,
        which is the regime of a power-law tail.
        """
        d1, d0 = a - b, b - c
        if d0 == 0.0:
            return a if d1 == 0.0 else None
        r = d1 / d0
        if not 0.0 < r < 1.0:
            return None
        return a + d1 * r / (1.0 - r)

    def _estimate(self, m, v, d, n, factor):
        """Extrapolated value and an error estimate at truncation ``n``.

        The error is the change of the extrapolated value between ``n/2`` and
        ``n``, which overstates the actual error when the tail is a clean
        power law. Without a monotone pattern the raw sum is returned with
        the fixed-exponent tail estimate.
        """
        i0, i1, i2, i3 = self._levels(m, v, d, n)
        fine = self._aitken(i0, i1, i2)
        coarse = self._aitken(i1, i2, i3)
        if fine is None or coarse is None:
            return i0, factor * abs(i0 - i1)
        return fine, abs(fine - coarse)

    def integral(self, m, v, d):
        key = (m, v, d)
        if key in self._cache:
            return self._cache[key]
        # cross-scale integrals can vanish (orthogonality at d = 0), so the
        # relative test gets a floor near rounding level of the m = 0 integral
        floor = 1e-11 * self.integral(0, 0, d) if (m, v) != (0, 0) else 0.0
        factor = _extrapolation_factor(d, self.bank)
        n = self.config.lattice_terms
        while True:
            value, err = self._estimate(m, v, d, n, factor)
            if err <= max(self.config.lattice_tol * abs(value), floor):
                break
            if 2 * n > self.config.lattice_max:
                raise PrecisionError(
                    f"int |D_(m={m},v={v})|^2 at d={d:g} not converged with {n} lattice "
                    f"terms (estimated error {err:.2e}); raise lattice_max"
                )
            n *= 2
        self._cache[key] = value
        return value


@lru_cache(maxsize=32)
def _d_integrals(order, config):
    return _DIntegrals(get_bank(order), config)


def D_integral(m, v, d, bank=None, config=DEFAULT_CONFIG):
    """``int_{-pi}^{pi} |D_{m,v}(lam; d)|^2 dlam``."""
    bank = _as_bank(bank)
    _check_K_domain(d, bank)
    return _d_integrals(bank.spec.order, config).integral(m, v, float(d))


def sigma_matrix(d, ell, scheme, bank=None, config=DEFAULT_CONFIG):
    """Limit covariance ``Sigma`` of the normalized scalograms at scales ``L..L+ell``.

    ``Sigma[i, i'] = 2 * 2^{(1+4d) i} sum_{v < 2^{i-i'}} V(0,0; i-i', v)
    int |D_{i-i',v}(.; d)|^2`` for ``i' <= i``, mirrored above the diagonal.
    """
    bank = _as_bank(bank)
    _check_K_domain(d, bank)
    if ell < 0:
        raise ConfigurationError("ell must be >= 0")
    integ = _d_integrals(bank.spec.order, config)
    S = np.zeros((ell + 1, ell + 1))
    for i in range(ell + 1):
        for i2 in range(i + 1):
            m = i - i2
            acc = 0.0
            for v in range(2**m):
                acc += scheme.limit_V(0, 0, m, v) * integ.integral(m, v, float(d))
            S[i, i2] = S[i2, i] = 2.0 * 2.0 ** ((1.0 + 4.0 * d) * i) * acc
    return S


@dataclass(frozen=True)
class VarianceReport:
    """Limit variance of the estimator and its ingredients at one ``d``."""

    d: float
    K_value: float
    Sigma: np.ndarray = field(repr=False)
    V_value: float
    scheme_tag: str
    w: tuple

    def is_psd(self, tol=1e-10):
        ev = np.linalg.eigvalsh(self.Sigma)
        return bool(ev.min() >= -tol * np.trace(self.Sigma))


def _quadratic_form(Sigma, d, w):
    w = np.asarray(w, dtype=float)
    i = np.arange(w.size)
    scaled = w * 2.0 ** (-2.0 * i * d)
    return float(scaled @ Sigma @ scaled)


def variance_report(d, ell, w, scheme, bank=None, config=DEFAULT_CONFIG):
    bank = _as_bank(bank)
    w = tuple(float(x) for x in getattr(w, "w", w))
    if len(w) != ell + 1:
        raise ConfigurationError("regression weights must have ell + 1 entries")
    K = K_of_d(d, bank, config)
    S = sigma_matrix(d, ell, scheme, bank, config)
    V = _quadratic_form(S, d, w) / K**2
    return VarianceReport(float(d), K, S, V, scheme.tag, w)


def estimator_variance(d, ell, w, scheme, bank=None, config=DEFAULT_CONFIG):
    """Limit variance ``V`` of ``delta_L^{-1/2} (d_hat - d)``."""
    return variance_report(d, ell, w, scheme, bank, config).V_value
