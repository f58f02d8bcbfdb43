"""Log-scale regression estimator of the local memory parameter.

``d_hat(u) = sum_{i=0}^{ell} w_i log sigma2_{L+i}(u)`` with weights satisfying
``sum w_i = 0`` and ``2 log(2) sum i w_i = 1``. Plug-in confidence intervals
use ``d_hat +- z sqrt(delta_L(u) V(d_hat))`` where ``delta_L`` is the largest
localization weight at the lowest scale and ``V`` the limit variance.
"""
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.special import ndtri

from .asymptotics import DEFAULT_CONFIG, estimator_variance
from .errors import AdvisoryError, ConfigurationError, DomainError, PrecisionError
from .scalogram import _as_bank, default_grid, dwt, local_scalogram
from .weights import WeightScheme, parse_kernel

LOG2 = np.log(2.0)

FLAG_BOUNDARY = "boundary"
FLAG_ZERO = "zero_scalogram"
FLAG_NO_CI = "ci_unavailable"


@dataclass(frozen=True)
class RegressionWeights:
    """Weights ``w_0..w_ell`` reading the log-slope of the scalogram."""

    w: tuple

    def __post_init__(self):
        w = np.asarray(self.w, dtype=float)
        if w.ndim != 1 or w.size < 2:
            raise ConfigurationError("need at least two regression weights (ell >= 1)")
        i = np.arange(w.size)
        if abs(w.sum()) > 1e-12 or abs(2.0 * LOG2 * (i @ w) - 1.0) > 1e-12:
            raise ConfigurationError(
                "regression weights must satisfy sum(w) = 0 and 2 log(2) sum(i w_i) = 1"
            )
        object.__setattr__(self, "w", tuple(float(x) for x in w))

    @property
    def ell(self):
        return len(self.w) - 1

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.w, dtype=dtype)


def ols_regression_weights(ell):
    """Least-squares slope weights ``(i - ell/2) / (2 log 2 sum_m (m - ell/2)^2)``."""
    if ell < 1:
        raise ConfigurationError("ell must be >= 1: a slope needs two scales")
    i = np.arange(ell + 1, dtype=float)
    c = i - ell / 2.0
    return RegressionWeights(tuple(c / (2.0 * LOG2 * np.sum(c * c))))


def normal_quantile(level):
    """Two-sided standard normal quantile ``z_{1 - (1 - level)/2}``."""
    if not 0.0 < level < 1.0:
        raise ConfigurationError("confidence level must lie in (0, 1)")
    return float(ndtri(1.0 - (1.0 - level) / 2.0))


@dataclass(frozen=True)
class EstimationPlan:
    """Scales, weights and grid of one estimation run.

    Parameters
    ----------
    L : int
        Lowest scale.
    ell : int
        Number of scales above ``L`` (``ell + 1`` scales in total).
    scheme : WeightScheme
    u_grid : array_like, optional
    level : float
        Confidence level of the intervals.
    weights : RegressionWeights, optional
        Defaults to :func:`ols_regression_weights`.
    """

    L: int = 2
    ell: int = 2
    scheme: WeightScheme = field(default_factory=WeightScheme)
    u_grid: object = None
    level: float = 0.95
    weights: RegressionWeights = None

    def __post_init__(self):
        if self.L < 1:
            raise ConfigurationError("lowest scale L must be >= 1")
        if self.weights is None:
            object.__setattr__(self, "weights", ols_regression_weights(self.ell))
        elif not isinstance(self.weights, RegressionWeights):
            object.__setattr__(self, "weights", RegressionWeights(tuple(self.weights)))
        if self.weights.ell != self.ell:
            raise ConfigurationError("regression weights must have ell + 1 entries")
        normal_quantile(self.level)
        grid = default_grid() if self.u_grid is None else np.asarray(self.u_grid, dtype=float)
        object.__setattr__(self, "u_grid", grid.reshape(-1))

    @property
    def scales(self):
        return tuple(range(self.L, self.L + self.ell + 1))

    def check_feasible(self, T, bank=None):
        """Raise :class:`ConfigurationError` if the plan cannot run on ``T`` samples."""
        bank = _as_bank(bank)
        bank.check_depth(T, self.L + self.ell)
        if self.scheme.kind == "kernel":
            top = bank.n_coeffs(T, self.L + self.ell)
            if top * self.scheme.bandwidth < 2:
                raise ConfigurationError(
                    f"bandwidth {self.scheme.bandwidth:g} leaves fewer than two coefficients "
                    f"at scale {self.L + self.ell} (T_j={top})"
                )


@dataclass(frozen=True)
class MemoryEstimate:
    """Per-u estimates, standard errors and confidence intervals."""

    u: np.ndarray
    d_hat: np.ndarray
    std_error: np.ndarray
    ci_lo: np.ndarray
    ci_hi: np.ndarray
    delta_L: np.ndarray
    flags: tuple
    scales: tuple
    level: float

    def rows(self):
        for k in range(self.u.size):
            yield (float(self.u[k]), float(self.d_hat[k]), float(self.std_error[k]),
                   float(self.ci_lo[k]), float(self.ci_hi[k]), "|".join(self.flags[k]))

    @property
    def ok(self):
        return np.isfinite(self.d_hat)


def estimate_d(scalogram, plan):
    """Regression estimate on a :class:`LocalScalogram`.

    u dropped by the boundary policy get the ``boundary`` flag; u where a
    scalogram value is zero get ``zero_scalogram``. Both yield NaN.
    """
    missing = [j for j in plan.scales if j not in scalogram.scales]
    if missing:
        raise ConfigurationError(f"scalogram lacks scales {missing}")
    rows = np.array([scalogram.scales.index(j) for j in plan.scales])
    vals = scalogram.values[rows]
    w = np.asarray(plan.weights.w)
    n = scalogram.u.size
    d_hat = np.full(n, np.nan)
    flags = []
    for k in range(n):
        if not scalogram.valid[k]:
            flags.append((FLAG_BOUNDARY,))
            continue
        col = vals[:, k]
        if np.any(col <= 0.0):
            flags.append((FLAG_ZERO,))
            continue
        d_hat[k] = float(w @ np.log(col))
        flags.append(())
    delta_L = scalogram.delta[rows[0]].copy()
    nan = np.full(n, np.nan)
    return MemoryEstimate(scalogram.u.copy(), d_hat, nan, nan.copy(), nan.copy(), delta_L,
                          tuple(flags), plan.scales, plan.level)


class VarianceTable:
    """Limit variance ``V(d)`` on a grid of step ``step`` with linear interpolation.

    Grid values are computed on first use and memoized, so a table built once
    serves every u of every series. Nodes where ``V`` cannot be evaluated are
    NaN, and so is any interpolation touching them.
    """

    def __init__(self, ell, weights, scheme, bank=None, step=0.01, config=DEFAULT_CONFIG):
        self.bank = _as_bank(bank)
        self.ell = ell
        self.weights = tuple(np.asarray(weights, dtype=float))
        self.scheme = scheme
        self.step = step
        self.config = config
        self._memo = {}

    def node(self, k):
        if k not in self._memo:
            d = round(k * self.step, 12)
            try:
                v = estimator_variance(d, self.ell, self.weights, self.scheme, self.bank,
                                       self.config)
            except (DomainError, PrecisionError):
                v = np.nan
            self._memo[k] = v
        return self._memo[k]

    def __call__(self, d):
        d = np.asarray(d, dtype=float)
        out = np.full(d.shape, np.nan)
        flat = out.reshape(-1)
        for idx, x in enumerate(d.reshape(-1)):
            if not np.isfinite(x):
                continue
            pos = x / self.step
            k = int(np.floor(pos))
            frac = pos - k
            lo = self.node(k)
            hi = self.node(k + 1) if frac > 1e-12 else lo
            flat[idx] = (1.0 - frac) * lo + frac * hi
        return out if out.ndim else float(out)

    @property
    def grid(self):
        keys = sorted(self._memo)
        return np.array([k * self.step for k in keys]), np.array([self._memo[k] for k in keys])


@lru_cache(maxsize=64)
def shared_variance_table(ell, weights, scheme, order, step=0.01):
    """Process-wide :class:`VarianceTable` keyed by its defining parameters."""
    return VarianceTable(ell, weights, scheme, order, step)


def confidence_interval(estimate, plan, table=None, bank=None):
    """Fill standard errors and intervals of ``estimate``.

    ``std_error = sqrt(delta_L(u) V(d_hat))``; u where ``d_hat`` is outside the
    domain of ``V`` get the ``ci_unavailable`` flag.
    """
    bank = _as_bank(bank)
    if table is None:
        table = shared_variance_table(plan.ell, plan.weights.w, plan.scheme, bank.spec.order)
    z = normal_quantile(plan.level)
    lo_dom, hi_dom = 0.5 - bank.alpha, bank.M + 0.5
    se = np.full(estimate.u.size, np.nan)
    flags = list(estimate.flags)
    for k, d in enumerate(estimate.d_hat):
        if not np.isfinite(d):
            continue
        V = table(d) if lo_dom < d < hi_dom else np.nan
        if np.isfinite(V) and np.isfinite(estimate.delta_L[k]):
            se[k] = np.sqrt(estimate.delta_L[k] * V)
        else:
            flags[k] = flags[k] + (FLAG_NO_CI,)
    return MemoryEstimate(estimate.u, estimate.d_hat, se, estimate.d_hat - z * se,
                          estimate.d_hat + z * se, estimate.delta_L, tuple(flags),
                          estimate.scales, estimate.level)


def make_scheme(weights="kernel", bandwidth=0.25, kernel=None):
    """Build a :class:`WeightScheme` from CLI-style arguments."""
    if weights == "recursive":
        return WeightScheme("recursive", bandwidth)
    return WeightScheme("kernel", bandwidth, parse_kernel(kernel) if not hasattr(kernel, "norms")
                        else kernel)


def estimate(series, L=2, ell=2, bandwidth=0.25, weights="kernel", kernel=None, wavelet=2,
             u_grid=None, level=0.95, ci=True, table=None):
    """Full pipeline: DWT, local scalogram, regression and (optionally) intervals.

    Returns
    -------
    (MemoryEstimate, LocalScalogram)
    """
    bank = _as_bank(wavelet)
    scheme = weights if isinstance(weights, WeightScheme) else make_scheme(weights, bandwidth,
                                                                            kernel)
    plan = EstimationPlan(L, ell, scheme, u_grid, level)
    x = np.asarray(series, dtype=float)
    plan.check_feasible(x.size, bank)
    pyr = dwt(x, bank, L + ell)
    sc = local_scalogram(pyr, scheme, plan.u_grid, plan.scales)
    est = estimate_d(sc, plan)
    if ci:
        est = confidence_interval(est, plan, table, bank)
    return est, sc


@dataclass(frozen=True)
class TuningAdvice:
    L: int
    bandwidth: float
    rate_exponent: float
    L_formula: float
    bandwidth_formula: float
    adjusted: bool


def advise_tuning(T, d_prior=0.0, beta=2.0, p=0, ell=2, bank=None, min_window=16):
    """Lowest scale and bandwidth balancing bias, variance and non-stationarity.

    ``2^L ~ T^{2/(3+6beta-2d+2p)}`` and ``b ~ T^{(2d-2p-2beta-1)/(3+6beta-2d+2p)}``,
    then adjusted so that ``T_L b >= min_window`` and ``L + ell`` is feasible.

    Raises
    ------
    AdvisoryError
        If no adjustment makes the pair feasible.
    """
    bank = _as_bank(bank)
    T = int(T)
    if not 0.0 < beta <= 2.0:
        raise ConfigurationError("beta must lie in (0, 2]")
    if not d_prior < p + 0.5:
        raise ConfigurationError("d_prior must be < p + 1/2")
    denom = 3.0 + 6.0 * beta - 2.0 * d_prior + 2.0 * p
    L_formula = np.log2(T) * 2.0 / denom
    b_formula = float(T ** ((2.0 * d_prior - 2.0 * p - 2.0 * beta - 1.0) / denom))
    rate = -2.0 * beta / (3.0 + 6.0 * beta + 2.0 * (p - d_prior))
    L = max(1, int(np.floor(L_formula + 0.5)))
    b = b_formula
    adjusted = False
    max_scale = bank.max_scale(T)
    while L > 1 and (L + ell > max_scale or bank.n_coeffs(T, L) * b < min_window):
        L -= 1
        adjusted = True
    if L + ell > max_scale:
        raise AdvisoryError(f"T={T} too short for {ell + 1} scales")
    T_L = bank.n_coeffs(T, L)
    if T_L * b < min_window:
        b = min_window / T_L
        adjusted = True
    if b >= 1.0 or bank.n_coeffs(T, L + ell) * b < 2:
        raise AdvisoryError(f"T={T} too short for a window of {min_window} coefficients")
    return TuningAdvice(L, float(b), float(rate), float(L_formula), b_formula, adjusted)
