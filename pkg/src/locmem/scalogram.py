"""Decimated wavelet transform and local scalograms.

The transform is computed in strict "valid" mode: only coefficients whose
filter support lies inside the sample are produced, so scale ``j`` has
``T_j = floor((T - L_j) / 2^j) + 1`` coefficients. No padding is ever applied.
"""
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import BoundaryError, ConfigurationError
from .wavelets import WaveletBank, get_bank
from .weights import WeightScheme, recursive_count, recursive_normalizer


def _as_bank(bank):
    if isinstance(bank, WaveletBank):
        return bank
    return get_bank(2 if bank is None else int(bank))


def default_grid(n_u=100):
    """Rescaled-time grid ``u_i = i / n_u`` for ``i = 1..n_u``."""
    if n_u < 1:
        raise ConfigurationError("grid size must be >= 1")
    return np.arange(1, n_u + 1) / n_u


@dataclass(frozen=True)
class WaveletPyramid:
    """Wavelet coefficients ``W[j][k]`` for ``j = 1..J``."""

    coeffs: tuple = field(repr=False)
    T: int
    bank: WaveletBank

    @property
    def J(self):
        return len(self.coeffs)

    @property
    def lengths(self):
        return tuple(c.size for c in self.coeffs)

    def level(self, j):
        if not 1 <= j <= self.J:
            raise ConfigurationError(f"scale {j} not in the pyramid (1..{self.J})")
        return self.coeffs[j - 1]


# Coefficients below ROUNDING_FACTOR * eps * max|x| * ||h_j||_1 are rounding
# residue (e.g. a constant or polynomial series under vanishing moments) and
# are snapped to exactly zero.
ROUNDING_FACTOR = 64.0


def _snap(detail, bank, j, amplitude):
    tol = ROUNDING_FACTOR * np.finfo(float).eps * amplitude * np.abs(bank.filter(j).taps).sum()
    detail[np.abs(detail) <= tol] = 0.0
    return detail


def dwt(series, bank=None, J=None):
    """Pyramid DWT of ``series`` down to scale ``J`` (deepest feasible if None).

    Raises
    ------
    ScaleDepthError
        If scale ``J`` has no complete coefficient.
    """
    bank = _as_bank(bank)
    x = np.asarray(series, dtype=float)
    if x.ndim != 1:
        raise ConfigurationError("series must be one-dimensional")
    T = x.size
    if J is None:
        J = bank.max_scale(T)
    bank.check_depth(T, J)
    out = []
    approx = x
    amplitude = float(np.max(np.abs(x))) if T else 0.0
    for j in range(1, J + 1):
        detail = np.convolve(approx, bank.highpass, mode="valid")[::2]
        approx = np.convolve(approx, bank.lowpass, mode="valid")[::2]
        out.append(_snap(detail[: bank.n_coeffs(T, j)], bank, j, amplitude))
    return WaveletPyramid(tuple(out), T, bank)


def dwt_direct(series, bank=None, J=1):
    """Reference DWT by direct convolution with each equivalent scale filter."""
    bank = _as_bank(bank)
    x = np.asarray(series, dtype=float)
    bank.check_depth(x.size, J)
    out = []
    amplitude = float(np.max(np.abs(x)))
    for j in range(1, J + 1):
        taps = bank.filter(j).taps
        out.append(_snap(np.convolve(x, taps, mode="valid")[:: 2**j], bank, j, amplitude))
    return WaveletPyramid(tuple(out), x.size, bank)


@dataclass(frozen=True)
class LocalScalogram:
    """Local scalogram values on a (scale, u) grid.

    ``values[s, i]`` is the scalogram at ``scales[s]`` and ``u[i]``; it is NaN
    where ``valid[i]`` is False (u dropped by the boundary policy).
    ``delta[s, i]`` is the largest weight used.
    """

    u: np.ndarray
    scales: tuple
    values: np.ndarray = field(repr=False)
    delta: np.ndarray = field(repr=False)
    valid: np.ndarray = field(repr=False)
    scheme_tag: str
    bandwidth: float
    T: int

    @property
    def zero_mask(self):
        """Valid u where at least one scale has a zero scalogram."""
        with np.errstate(invalid="ignore"):
            return self.valid & np.any(self.values <= 0.0, axis=0)

    def at_scale(self, j):
        return self.values[self.scales.index(j)]


def _scales_tuple(scales):
    scales = tuple(int(j) for j in scales)
    if not scales or min(scales) < 1:
        raise ConfigurationError("scales must be positive integers")
    return scales


def local_scalogram(pyramid, scheme, u_grid=None, scales=None, drop_boundary=True,
                    method="auto"):
    """``sigma2_j(u) = sum_k gamma_j(k) W_{j,k}^2`` on a grid.

    Parameters
    ----------
    pyramid : WaveletPyramid
    scheme : WeightScheme
    u_grid : array_like, optional
        Defaults to :func:`default_grid`.
    scales : sequence of int, optional
        Defaults to every scale in the pyramid.
    drop_boundary : bool
        Mark u outside the scheme's domain (or without any weight) invalid
        instead of raising :class:`BoundaryError`.
    method : {"auto", "explicit"}
        ``"auto"`` evaluates recursive weights by the exponential recursion;
        ``"explicit"`` always materializes each weight vector.
    """
    u = default_grid() if u_grid is None else np.asarray(u_grid, dtype=float).reshape(-1)
    scales = _scales_tuple(range(1, pyramid.J + 1) if scales is None else scales)
    for j in scales:
        pyramid.level(j)
    values = np.full((len(scales), u.size), np.nan)
    delta = np.full_like(values, np.nan)
    valid = np.ones(u.size, dtype=bool)
    if drop_boundary:
        valid &= np.array([scheme.in_domain(x) for x in u], dtype=bool)
    scan = scheme.kind == "recursive" and method == "auto"
    for s, j in enumerate(scales):
        w2 = pyramid.level(j) ** 2
        T_j = w2.size
        if scan:
            bT = scheme.bandwidth * T_j
            S = kernels.exp_scan(w2, np.exp(-1.0 / bT))
        for i, x in enumerate(u):
            if not valid[i]:
                continue
            try:
                if scan:
                    n = min(recursive_count(x, T_j), T_j)
                    if n < 1 or not 0.0 <= x <= 1.0:
                        raise BoundaryError(
                            f"u * T_j = {x * T_j:.3g} < 1: no coefficient before u={x:g}"
                        )
                    rho = recursive_normalizer(n, bT)
                    values[s, i] = S[n - 1] / rho
                    delta[s, i] = 1.0 / rho
                else:
                    wv = scheme.weights(x, T_j)
                    values[s, i] = wv.apply(w2)
                    delta[s, i] = wv.delta
            except BoundaryError:
                if not drop_boundary:
                    raise
                valid[i] = False
    values[:, ~valid] = np.nan
    delta[:, ~valid] = np.nan
    return LocalScalogram(u, scales, values, delta, valid, scheme.tag,
                          float(scheme.bandwidth), pyramid.T)


class StreamingScalogram:
    """Online recursive local scalogram.

    Samples are pushed in order; every wavelet coefficient is emitted as soon
    as its support is complete and folded into the exponential recursion
    ``S_{j,k} = exp(-1/(b T_j)) S_{j,k-1} + W_{j,k}^2``. Each level keeps fewer
    than ``L0 + 1`` pending samples.

    Parameters
    ----------
    bank : WaveletBank or int
    scales : sequence of int
    T : int
        Total length, needed in advance to fix the forgetting exponents.
    bandwidth : float
    """

    def __init__(self, bank, scales, T, bandwidth, backend=None):
        self.bank = _as_bank(bank)
        self.scales = _scales_tuple(scales)
        self.T = int(T)
        self.J = max(self.scales)
        self.bank.check_depth(self.T, self.J)
        if not 0 < bandwidth < 1:
            raise ConfigurationError("bandwidth must lie in (0, 1)")
        self.bandwidth = float(bandwidth)
        self.backend = backend
        self.n_coeffs = {j: self.bank.n_coeffs(self.T, j) for j in range(1, self.J + 1)}
        self._rate = {j: np.exp(-1.0 / (self.bandwidth * self.n_coeffs[j])) for j in self.scales}
        self._buffers = [np.empty(0) for _ in range(self.J)]
        self._history = {j: [] for j in self.scales}
        self._state = {j: 0.0 for j in self.scales}
        self._emitted = {j: 0 for j in range(1, self.J + 1)}
        self.consumed = 0
        self._amplitude = 0.0

    def push(self, x):
        """Consume one sample or a chunk of samples."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        if self.consumed + x.size > self.T:
            raise ConfigurationError("stream longer than the declared T")
        self.consumed += x.size
        if x.size:
            self._amplitude = max(self._amplitude, float(np.max(np.abs(x))))
        L0 = self.bank.base_length
        incoming = x
        for j in range(1, self.J + 1):
            buf = np.concatenate((self._buffers[j - 1], incoming))
            if buf.size < L0:
                self._buffers[j - 1] = buf
                break
            m = (buf.size - L0) // 2 + 1
            window = buf[: 2 * m + L0 - 2]
            detail = np.convolve(window, self.bank.highpass, mode="valid")[::2]
            incoming = np.convolve(window, self.bank.lowpass, mode="valid")[::2]
            self._buffers[j - 1] = buf[2 * m:]
            room = self.n_coeffs[j] - self._emitted[j]
            detail = _snap(detail[:room], self.bank, j, self._amplitude)
            self._emitted[j] += detail.size
            if j in self._history and detail.size:
                S = kernels.exp_scan(detail**2, self._rate[j], self._state[j],
                                     backend=self.backend)
                self._history[j].append(S)
                self._state[j] = float(S[-1])
        return self

    @property
    def buffered(self):
        """Number of samples currently held across all levels."""
        return sum(b.size for b in self._buffers)

    def emitted(self, j):
        return self._emitted[j]

    def _states(self, j):
        hist = self._history[j]
        if len(hist) > 1:
            self._history[j] = [np.concatenate(hist)]
        return self._history[j][0] if self._history[j] else np.empty(0)

    def finalize(self, u, j):
        """Recursive local scalogram at ``u`` and scale ``j`` from the consumed data.

        Raises
        ------
        BoundaryError
            If fewer than ``floor(u T_j)`` coefficients have been emitted.
        """
        if j not in self._history:
            raise ConfigurationError(f"scale {j} is not tracked")
        T_j = self.n_coeffs[j]
        n = min(recursive_count(u, T_j), T_j)
        if n < 1 or not 0.0 <= u <= 1.0:
            raise BoundaryError(f"no coefficient before u={u:g} at scale {j}")
        if n > self._emitted[j]:
            raise BoundaryError(
                f"u={u:g} needs {n} coefficients at scale {j}, only {self._emitted[j]} emitted"
            )
        S = self._states(j)
        return float(S[n - 1] / recursive_normalizer(n, self.bandwidth * T_j))

    def scalogram(self, u_grid=None):
        """Finalize on a grid; u without enough coefficients are marked invalid."""
        u = default_grid() if u_grid is None else np.asarray(u_grid, dtype=float).reshape(-1)
        values = np.full((len(self.scales), u.size), np.nan)
        delta = np.full_like(values, np.nan)
        valid = np.ones(u.size, dtype=bool)
        for s, j in enumerate(self.scales):
            T_j = self.n_coeffs[j]
            for i, x in enumerate(u):
                if not valid[i]:
                    continue
                try:
                    values[s, i] = self.finalize(x, j)
                except BoundaryError:
                    valid[i] = False
                    continue
                n = min(recursive_count(x, T_j), T_j)
                delta[s, i] = 1.0 / recursive_normalizer(n, self.bandwidth * T_j)
        values[:, ~valid] = np.nan
        delta[:, ~valid] = np.nan
        return LocalScalogram(u, self.scales, values, delta, valid, "recursive",
                              self.bandwidth, self.T)


def streaming_scalogram(samples, bank, scales, T, bandwidth, chunk=1, backend=None):
    """Feed ``samples`` through a :class:`StreamingScalogram` in chunks of ``chunk``."""
    eng = StreamingScalogram(bank, scales, T, bandwidth, backend=backend)
    samples = np.asarray(samples, dtype=float)
    for start in range(0, samples.size, chunk):
        eng.push(samples[start:start + chunk])
    return eng


def tangent_scalogram(model, u, T, seed, scheme, scales, bank=None, **sim_kwargs):
    """Scalogram at ``u`` of the stationary tangent path (a simulation-only oracle)."""
    from .simulate import simulate_tangent

    path = simulate_tangent(model, u, T, seed, **sim_kwargs)
    scales = _scales_tuple(scales)
    pyr = dwt(path.values, bank, max(scales))
    sc = local_scalogram(pyr, scheme, [u], scales, drop_boundary=False)
    return sc.values[:, 0]
