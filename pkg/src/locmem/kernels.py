"""Hot numeric loops, each with a numba kernel and a pure-numpy twin.

The public functions dispatch on ``backend`` (``None`` picks numba unless
``LOCMEM_DISABLE_NUMBA`` is set). Both paths compute the same quantity; the
test-suite checks them against each other.
"""
import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.signal import lfilter

from ._accel import njit, resolve_backend

# rows per block in the numpy fallbacks; bounds peak memory at ~_BLOCK * n_taps
_BLOCK = 256


def frac_arma_coefficients(delta, phi=(), theta=(), n_taps=1):
    """MA(inf) coefficients of (1-z)^-delta (1 + sum theta z^k) / (1 - sum phi z^k).

    Parameters
    ----------
    delta : float
        Fractional integration order.
    phi, theta : sequence of float
        AR and MA polynomial coefficients (without the leading one).
    n_taps : int
        Number of leading coefficients returned.

    Returns
    -------
    ndarray, shape (n_taps,)
    """
    n = int(n_taps)
    k = np.arange(1, n, dtype=float)
    pi = np.empty(n)
    pi[0] = 1.0
    # binomial-series recurrence, never Gamma ratios
    pi[1:] = np.cumprod((k - 1.0 + delta) / k)
    b = pi.copy()
    for m, th in enumerate(theta, start=1):
        if m < n:
            b[m:] += th * pi[:-m]
    if len(phi) == 0:
        return b
    a = lfilter([1.0], np.r_[1.0, -np.asarray(phi, dtype=float)], b)
    return a


@njit(cache=True, nogil=True)
def _tvarfima_ma_numba(delta, phi, theta, sigma, eps, N):
    T = delta.shape[0]
    q = phi.shape[1]
    r = theta.shape[1]
    out = np.empty(T)
    pi = np.empty(N + 1)
    a = np.empty(N + 1)
    for t in range(T):
        d = delta[t]
        pi[0] = 1.0
        for k in range(1, N + 1):
            pi[k] = pi[k - 1] * (k - 1.0 + d) / k
        acc = 0.0
        base = t + N
        for k in range(N + 1):
            b = pi[k]
            for m in range(1, min(r, k) + 1):
                b += theta[t, m - 1] * pi[k - m]
            for m in range(1, min(q, k) + 1):
                b += phi[t, m - 1] * a[k - m]
            a[k] = b
            acc += b * eps[base - k]
        out[t] = sigma[t] * acc
    return out


def _tvarfima_ma_numpy(delta, phi, theta, sigma, eps, N):
    T = delta.shape[0]
    q = phi.shape[1]
    r = theta.shape[1]
    out = np.empty(T)
    windows = sliding_window_view(eps, N + 1)
    k = np.arange(1, N + 1, dtype=float)
    for start in range(0, T, _BLOCK):
        stop = min(start + _BLOCK, T)
        d = delta[start:stop, None]
        pi = np.empty((stop - start, N + 1))
        pi[:, 0] = 1.0
        pi[:, 1:] = np.cumprod((k - 1.0 + d) / k, axis=1)
        b = pi.copy()
        for m in range(1, min(r, N) + 1):
            b[:, m:] += theta[start:stop, m - 1, None] * pi[:, :-m]
        if q:
            a = b
            ph = phi[start:stop]
            for j in range(1, N + 1):
                mm = min(q, j)
                a[:, j] += np.einsum("ij,ij->i", ph[:, :mm], a[:, j - 1::-1][:, :mm])
        else:
            a = b
        out[start:stop] = sigma[start:stop] * np.einsum(
            "ij,ij->i", a[:, ::-1], windows[start:stop]
        )
    return out


def tvarfima_ma(delta, phi, theta, sigma, eps, N, backend=None):
    """Time-varying truncated MA filter of a fractional ARMA family.

    ``out[t] = sigma[t] * sum_{k=0}^{N} a_k(t) * eps[t + N - k]`` where
    ``a_k(t)`` are the MA(inf) coefficients of the ARFIMA model frozen at
    row ``t`` (``delta[t]``, ``phi[t]``, ``theta[t]``).

    Parameters
    ----------
    delta, sigma : ndarray, shape (T,)
    phi : ndarray, shape (T, q)
    theta : ndarray, shape (T, r)
    eps : ndarray, shape (T + N,)
        Innovations; the first ``N`` entries are pre-sample noise.
    N : int
        Highest lag kept.
    """
    delta = np.ascontiguousarray(delta, dtype=float)
    sigma = np.ascontiguousarray(sigma, dtype=float)
    phi = np.ascontiguousarray(phi, dtype=float).reshape(delta.shape[0], -1)
    theta = np.ascontiguousarray(theta, dtype=float).reshape(delta.shape[0], -1)
    eps = np.ascontiguousarray(eps, dtype=float)
    if eps.shape[0] != delta.shape[0] + N:
        raise ValueError("eps must have length T + N")
    if resolve_backend(backend) == "numba":
        return _tvarfima_ma_numba(delta, phi, theta, sigma, eps, int(N))
    return _tvarfima_ma_numpy(delta, phi, theta, sigma, eps, int(N))


@njit(cache=True, nogil=True)
def _tabulated_ma_numba(table, idx, frac, eps):
    T = idx.shape[0]
    n = table.shape[1]
    out = np.empty(T)
    for t in range(T):
        i = idx[t]
        f = frac[t]
        acc0 = 0.0
        acc1 = 0.0
        base = t + n - 1
        for c in range(n):
            e = eps[base - c]
            acc0 += table[i, c] * e
            acc1 += table[i + 1, c] * e
        out[t] = (1.0 - f) * acc0 + f * acc1
    return out


def _tabulated_ma_numpy(table, idx, frac, eps):
    T = idx.shape[0]
    n = table.shape[1]
    out = np.empty(T)
    windows = sliding_window_view(eps, n)
    rev = table[:, ::-1]
    for start in range(0, T, _BLOCK):
        stop = min(start + _BLOCK, T)
        w = windows[start:stop]
        i = idx[start:stop]
        f = frac[start:stop]
        acc0 = np.einsum("ij,ij->i", rev[i], w)
        acc1 = np.einsum("ij,ij->i", rev[i + 1], w)
        out[start:stop] = (1.0 - f) * acc0 + f * acc1
    return out


def tabulated_ma(table, idx, frac, eps, backend=None):
    """MA filter whose taps are interpolated between rows of a table.

    ``out[t] = sum_c a_t[c] * eps[t + n - 1 - c]`` with
    ``a_t = (1 - frac[t]) * table[idx[t]] + frac[t] * table[idx[t] + 1]``.
    """
    table = np.ascontiguousarray(table, dtype=float)
    idx = np.ascontiguousarray(idx, dtype=np.int64)
    frac = np.ascontiguousarray(frac, dtype=float)
    eps = np.ascontiguousarray(eps, dtype=float)
    if eps.shape[0] != idx.shape[0] + table.shape[1] - 1:
        raise ValueError("eps must have length T + n_taps - 1")
    if idx.size and (idx.min() < 0 or idx.max() + 1 >= table.shape[0]):
        raise ValueError("interpolation index out of table range")
    if resolve_backend(backend) == "numba":
        return _tabulated_ma_numba(table, idx, frac, eps)
    return _tabulated_ma_numpy(table, idx, frac, eps)


@njit(cache=True, nogil=True)
def _exp_scan_numba(w, r, s0):
    out = np.empty(w.shape[0])
    s = s0
    for t in range(w.shape[0]):
        s = r * s + w[t]
        out[t] = s
    return out


def exp_scan(w, r, s0=0.0, backend=None):
    """Exponential-forgetting recursion ``s_t = r * s_{t-1} + w_t``.

    Returns every intermediate state, starting from ``s_{-1} = s0``.
    """
    w = np.ascontiguousarray(w, dtype=float)
    if w.size == 0:
        return np.empty(0)
    if resolve_backend(backend) == "numba":
        return _exp_scan_numba(w, float(r), float(s0))
    return lfilter([1.0], [1.0, -r], w, zi=[r * s0])[0]


@njit(cache=True, nogil=True)
def _cascade_product_numba(xi, hp, lp, depth, mu):
    out = np.empty(xi.shape[0], dtype=np.complex128)
    nh = hp.shape[0]
    nl = lp.shape[0]
    for t in range(xi.shape[0]):
        x = xi[t]
        w = 0.5 * x
        z = complex(np.cos(w), -np.sin(w))
        val = complex(hp[nh - 1], 0.0)
        for c in range(nh - 2, -1, -1):
            val = val * z + hp[c]
        scale = 0.5
        for _ in range(depth):
            scale *= 0.5
            w = x * scale
            z = complex(np.cos(w), -np.sin(w))
            acc = complex(lp[nl - 1], 0.0)
            for c in range(nl - 2, -1, -1):
                acc = acc * z + lp[c]
            val *= acc
        w = mu * x * scale
        out[t] = val * complex(np.cos(w), -np.sin(w))
    return out


def _symbol(taps, omega):
    z = np.exp(-1j * omega)
    out = np.full(np.shape(omega), taps[-1], dtype=complex)
    for c in taps[-2::-1]:
        out = out * z + c
    return out


def _cascade_product_numpy(xi, hp, lp, depth, mu):
    out = _symbol(hp, xi / 2.0)
    scale = 0.5
    for _ in range(depth):
        scale *= 0.5
        out = out * _symbol(lp, xi * scale)
    return out * np.exp(-1j * mu * xi * scale)


def cascade_product(xi, hp, lp, depth, mu, backend=None):
    """Truncated refinement product ``hp(xi/2) prod_{k=1}^{depth} lp(xi/2^{k+1})``.

    ``hp`` and ``lp`` are symbol coefficients (``sum_n c_n e^{-i n omega}``);
    the result is multiplied by ``exp(-i mu xi 2^{-depth-1})``, the first-order
    phase of the discarded factors.
    """
    xi = np.asarray(xi, dtype=float)
    shape = xi.shape
    flat = np.ascontiguousarray(xi.reshape(-1))
    hp = np.ascontiguousarray(hp, dtype=float)
    lp = np.ascontiguousarray(lp, dtype=float)
    if resolve_backend(backend) == "numba":
        out = _cascade_product_numba(flat, hp, lp, int(depth), float(mu))
    else:
        out = _cascade_product_numpy(flat, hp, lp, int(depth), float(mu))
    return out.reshape(shape)
