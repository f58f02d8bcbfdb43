"""Localization weights for the local scalogram.

Two families are provided:

* two-sided kernel weights ``gamma(k) = K((u T_j - k) / (b T_j)) / rho`` with a
  compactly supported symmetric kernel on ``[-1/2, 1/2]`` (rectangle by default);
* one-sided recursive (exponential-forgetting) weights
  ``gamma(k) = exp(-(n - 1 - k) / (b T_j)) / rho`` for ``k < n = floor(u T_j)``.

Both are normalized to sum one. ``numerical_V`` evaluates the normalized
cross-correlation of decimated weight sequences whose large-sample limit enters
the variance of the estimator.
"""
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .errors import BoundaryError, ConfigurationError

# guards floor/ceil of u*T_j against representation error (e.g. 0.29 * 100)
_TIE_EPS = 1e-9


# --------------------------------------------------------------------------
# kernels


@dataclass(frozen=True)
class RectangleKernel:
    """Indicator of the closed interval ``[-1/2, 1/2]``."""

    name: str = field(default="rectangle", init=False)

    def __call__(self, x):
        return (np.abs(np.asarray(x, dtype=float)) <= 0.5 + _TIE_EPS).astype(float)

    def norms(self):
        """``(||K||_1, ||K||_2^2, ||K||_inf)``."""
        return 1.0, 1.0, 1.0


@dataclass(frozen=True)
class TabulatedKernel:
    """Piecewise-linear kernel through equispaced values on ``[-1/2, 1/2]``.

    The values must be nonnegative, symmetric and not all zero.
    """

    values: tuple
    name: str = field(default="tabulated", init=False)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 1 or v.size < 2:
            raise ConfigurationError("a tabulated kernel needs at least two values")
        if not np.all(np.isfinite(v)) or np.any(v < 0):
            raise ConfigurationError("kernel values must be finite and nonnegative")
        if not np.allclose(v, v[::-1], rtol=1e-12, atol=1e-12 * v.max()):
            raise ConfigurationError("kernel values must be symmetric")
        if v.max() == 0:
            raise ConfigurationError("kernel is identically zero")
        object.__setattr__(self, "values", tuple(float(x) for x in v))

    @classmethod
    def from_csv(cls, path):
        from .io import read_series

        return cls(tuple(read_series(path)))

    @property
    def nodes(self):
        return np.linspace(-0.5, 0.5, len(self.values))

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return np.interp(x, self.nodes, np.asarray(self.values), left=0.0, right=0.0)

    def norms(self):
        v = np.asarray(self.values)
        h = 1.0 / (v.size - 1)
        l1 = h * (v.sum() - 0.5 * (v[0] + v[-1]))
        # exact integral of a squared linear interpolant
        a, b = v[:-1], v[1:]
        l2 = h * np.sum(a * a + a * b + b * b) / 3.0
        return float(l1), float(l2), float(v.max())


RECTANGLE = RectangleKernel()


def parse_kernel(text):
    """``"rectangle"`` or ``"file:<path>"`` to a kernel object."""
    if text in (None, "", "rectangle"):
        return RECTANGLE
    if isinstance(text, str) and text.startswith("file:"):
        return TabulatedKernel.from_csv(text[5:])
    raise ConfigurationError(f"unknown kernel specification {text!r}")


# --------------------------------------------------------------------------
# weight vectors


@dataclass(frozen=True)
class WeightVector:
    """Sparse weight vector: ``values`` occupy indices ``offset .. offset+len-1``."""

    offset: int
    values: np.ndarray = field(repr=False)
    length: int
    rho: float = 1.0

    @property
    def support(self):
        return np.arange(self.offset, self.offset + self.values.size)

    @property
    def delta(self):
        return float(self.values.max())

    def dense(self):
        out = np.zeros(self.length)
        out[self.offset:self.offset + self.values.size] = self.values
        return out

    def apply(self, x):
        """``sum_k gamma(k) x[k]`` for an array of length ``length``."""
        return float(self.values @ np.asarray(x)[self.offset:self.offset + self.values.size])


def _check_common(u, T_j, b):
    if not b > 0:
        raise ConfigurationError("bandwidth must be positive")
    if T_j < 1:
        raise BoundaryError("no wavelet coefficients available at this scale")
    if not 0.0 <= u <= 1.0:
        raise BoundaryError(f"rescaled time u={u} outside [0, 1]")


def kernel_weights(u, T_j, b, kernel=RECTANGLE):
    """Two-sided kernel weights centred at ``u T_j`` with window ``b T_j``.

    Parameters
    ----------
    u : float
        Rescaled time in [0, 1].
    T_j : int
        Number of coefficients at the scale.
    b : float
        Bandwidth; values ``>= 1`` centred at ``u = 1/2`` give uniform weights.
    kernel : RectangleKernel or TabulatedKernel

    Raises
    ------
    ConfigurationError
        If ``b T_j < 2``.
    BoundaryError
        If the kernel window contains no coefficient index.
    """
    _check_common(u, T_j, b)
    width = b * T_j
    if width < 2:
        raise ConfigurationError(
            f"b * T_j = {width:.3g} < 2: the window holds fewer than two coefficients"
        )
    centre = u * T_j
    lo = max(0, int(np.ceil(centre - width / 2 - _TIE_EPS)))
    hi = min(T_j - 1, int(np.floor(centre + width / 2 + _TIE_EPS)))
    if hi < lo:
        raise BoundaryError(
            f"kernel window at u={u:g} misses every coefficient; drop u < b/2 and u > 1 - b/2"
        )
    k = np.arange(lo, hi + 1)
    vals = kernel((centre - k) / width)
    nz = np.flatnonzero(vals > 0)
    if nz.size == 0:
        raise BoundaryError(
            f"kernel weights vanish at u={u:g}; drop u < b/2 and u > 1 - b/2"
        )
    vals = vals[nz[0]:nz[-1] + 1]
    rho = math.fsum(vals)  # correctly rounded, so the weights sum to one within ulps
    return WeightVector(lo + int(nz[0]), vals / rho, int(T_j), rho)


def recursive_normalizer(n, bT):
    """``rho = sum_{k=0}^{n-1} exp(-k / bT)`` in closed form."""
    return float(np.expm1(-n / bT) / np.expm1(-1.0 / bT))


def recursive_count(u, T_j):
    """Number of coefficients ``floor(u T_j)`` entering the recursive weights."""
    return int(np.floor(u * T_j + _TIE_EPS))


def recursive_weights(u, T_j, b):
    """One-sided exponentially forgetting weights ending at ``floor(u T_j) - 1``."""
    _check_common(u, T_j, b)
    n = min(recursive_count(u, T_j), int(T_j))
    if n < 1:
        raise BoundaryError(f"u * T_j = {u * T_j:.3g} < 1: no coefficient before u={u:g}")
    bT = b * T_j
    rho = recursive_normalizer(n, bT)
    vals = np.exp(-np.arange(n - 1, -1, -1, dtype=float) / bT) / rho
    return WeightVector(0, vals, int(T_j), rho)


# --------------------------------------------------------------------------
# diagnostics


@dataclass(frozen=True)
class WeightDiagnostics:
    delta: float
    gamma_q: tuple


def diagnostics(weights, u, T, j):
    """Sup-weight ``delta`` and localization sums ``Gamma_q``, ``q = 0, 1, 2``.

    ``Gamma_q = sum_k |gamma(k)| |k - T u 2^{-j}|^q``.
    """
    k = weights.support.astype(float)
    g = np.abs(weights.values)
    dist = np.abs(k - T * u / 2.0**j)
    gam = tuple(float(np.sum(g * dist**q)) for q in (0, 1, 2))
    return WeightDiagnostics(float(g.max()), gam)


def weight_fourier(weights, i, v, lam):
    """``Phi(lam; i, v) = sum_l gamma(2^i l + v) exp(i l lam)``.

    ``weights`` are the weights at the finer scale ``j - i``; the sum runs over
    ``0 <= l < 2^{-i} (T_{j-i} - v)``.
    """
    step = 2**i
    if not 0 <= v < step:
        raise ConfigurationError("v must satisfy 0 <= v < 2^i")
    lam = np.asarray(lam, dtype=float)
    first = -(-(weights.offset - v) // step)  # ceil
    first = max(first, 0)
    l = np.arange(first, (weights.offset + weights.values.size - 1 - v) // step + 1)
    vals = weights.values[step * l + v - weights.offset] if l.size else np.empty(0)
    return np.exp(1j * np.multiply.outer(lam, l.astype(float))) @ vals


def _cross_sum(w1, i1, v1, w2, i2, v2):
    """``sum_l gamma_1(2^{i1} l + v1) gamma_2(2^{i2} l + v2)`` over common ``l``."""
    def subseq(w, i, v):
        step = 2**i
        first = max(-(-(w.offset - v) // step), 0)
        last = (w.offset + w.values.size - 1 - v) // step
        if last < first:
            return 0, np.empty(0)
        l = np.arange(first, last + 1)
        return first, w.values[step * l + v - w.offset]

    f1, a = subseq(w1, i1, v1)
    f2, c = subseq(w2, i2, v2)
    lo = max(f1, f2)
    hi = min(f1 + a.size, f2 + c.size)
    if hi <= lo:
        return 0.0
    return float(a[lo - f1:hi - f1] @ c[lo - f2:hi - f2])


def numerical_V(scheme, u, T_j, i, v, i2, v2, n_coeffs=None):
    """``delta_j^{-1} int Phi(.; i, v) conj(Phi(.; i2, v2))`` via the exact discrete identity.

    The integral over ``[-pi, pi]`` of ``e^{i l lam} e^{-i l' lam}`` is ``2 pi``
    when ``l = l'`` and zero otherwise, so the integral reduces to ``2 pi``
    times a correlation of the two decimated weight sequences.

    Parameters
    ----------
    scheme : WeightScheme
    u : float
    T_j : int
        Number of coefficients at the reference scale ``j``.
    i, v, i2, v2 : int
        Decimation levels and phases.
    n_coeffs : callable, optional
        ``n_coeffs(i) -> T_{j-i}``; defaults to the idealized ``2^i T_j``.
    """
    if n_coeffs is None:
        n_coeffs = lambda m: int(T_j) * 2**m  # noqa: E731
    delta = scheme.weights(u, int(n_coeffs(0))).delta
    w1 = scheme.weights(u, int(n_coeffs(i)))
    w2 = scheme.weights(u, int(n_coeffs(i2)))
    return 2.0 * np.pi * _cross_sum(w1, i, v, w2, i2, v2) / delta


# --------------------------------------------------------------------------
# schemes


@dataclass(frozen=True)
class WeightScheme:
    """A family of localization weights indexed by ``(u, T_j)``.

    Parameters
    ----------
    kind : {"kernel", "recursive"}
    bandwidth : float
        ``b`` in ``(0, 1)``; kernel weights also accept ``b >= 1`` (global window).
    kernel : RectangleKernel or TabulatedKernel, optional
        Kernel for ``kind="kernel"``; rectangle by default.
    """

    kind: str = "kernel"
    bandwidth: float = 0.25
    kernel: object = None

    def __post_init__(self):
        if self.kind not in ("kernel", "recursive"):
            raise ConfigurationError(f"unknown weight kind {self.kind!r}")
        if not (self.bandwidth > 0 and np.isfinite(self.bandwidth)):
            raise ConfigurationError("bandwidth must be positive and finite")
        if self.kind == "recursive" and self.bandwidth >= 1:
            raise ConfigurationError("recursive bandwidth must lie in (0, 1)")
        if self.kind == "kernel" and self.kernel is None:
            object.__setattr__(self, "kernel", RECTANGLE)
        if self.kind == "recursive" and self.kernel is not None:
            raise ConfigurationError("recursive weights take no kernel")

    @property
    def tag(self):
        if self.kind == "recursive":
            return "recursive"
        return f"kernel:{self.kernel.name}"

    def weights(self, u, T_j):
        if self.kind == "kernel":
            return kernel_weights(u, T_j, self.bandwidth, self.kernel)
        return recursive_weights(u, T_j, self.bandwidth)

    def in_domain(self, u):
        """Boundary policy: two-sided kernels need ``b/2 <= u <= 1 - b/2``."""
        if self.kind == "recursive":
            return 0.0 < u <= 1.0
        half = self.bandwidth / 2.0
        return half - _TIE_EPS <= u <= 1.0 - half + _TIE_EPS

    @property
    def delta_rate(self):
        """Constant ``c`` in ``delta_{j,T} ~ c / (b T_j)``."""
        if self.kind == "recursive":
            return 1.0
        l1, _, linf = self.kernel.norms()
        return linf / l1

    def limit_V(self, i, v, i2, v2):
        """Large-sample limit of :func:`numerical_V`."""
        scale = 2.0 ** (-i - i2)
        if self.kind == "recursive":
            return np.pi * scale
        if isinstance(self.kernel, RectangleKernel):
            return 2.0 * np.pi * scale
        return _custom_limit_V(self, i, v, i2, v2)


@lru_cache(maxsize=256)
def _custom_limit_V(scheme, i, v, i2, v2):
    T_j = int(max(1e5, 2000.0 / scheme.bandwidth))
    return numerical_V(scheme, 0.5, T_j, i, v, i2, v2)
