"""Synthetic stationary processes with closed-form conditional laws, plus the
reference statistics used to judge a trained forecaster against them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from datetime import datetime, timedelta

import numpy as np

from .series import SeriesFrame

DEFAULT_BURN_IN = 1000
_SYNTH_START = datetime(2023, 1, 1)
_SYNTH_STEP = timedelta(minutes=5)


@dataclass(frozen=True)
class ArProcess:
    """Gaussian-driven autoregression x_t = sum phi_i x_{t-i} + sigma eps_t."""

    coefficients: tuple[float, ...]
    noise_std: float = 1.0

    def __post_init__(self):
        coeffs = tuple(float(c) for c in self.coefficients)
        if not coeffs:
            raise ValueError("need at least one coefficient")
        if self.noise_std <= 0:
            raise ValueError("noise_std must be positive")
        radius = max(abs(ev) for ev in np.linalg.eigvals(_companion(coeffs)))
        if radius >= 1.0:
            raise ValueError(f"non-stationary coefficients (spectral radius {radius:.4f})")
        object.__setattr__(self, "coefficients", coeffs)

    @property
    def order(self) -> int:
        return len(self.coefficients)


def _companion(coeffs: tuple[float, ...]) -> np.ndarray:
    p = len(coeffs)
    mat = np.zeros((p, p))
    mat[0, :] = coeffs
    if p > 1:
        mat[1:, :-1] = np.eye(p - 1)
    return mat


def gen_ar(
    process: ArProcess,
    n: int,
    seed: int = 0,
    burn_in: int = DEFAULT_BURN_IN,
    channel: str = "x",
    start_time: datetime = _SYNTH_START,
    step: timedelta = _SYNTH_STEP,
) -> SeriesFrame:
    """Sample path of length n after discarding the burn-in transient."""
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = np.random.default_rng(seed)
    p = process.order
    total = n + burn_in
    eps = rng.standard_normal(total) * process.noise_std
    x = np.zeros(total + p)
    coeffs = np.array(process.coefficients)[::-1]
    for t in range(total):
        x[t + p] = x[t : t + p] @ coeffs + eps[t]
    return SeriesFrame(
        start_time=start_time,
        step=step,
        channels=(channel,),
        values=x[p + burn_in :, None],
    )


def ar_conditional(process: ArProcess, history, horizon: int) -> tuple[float, float]:
    """Exact mean and variance of x_{t+horizon} given history up to t."""
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    hist = np.asarray(history, dtype=np.float64).ravel()
    p = process.order
    if hist.size < p:
        raise ValueError(f"history must cover at least {p} values")
    state = hist[-p:][::-1]  # newest first, matching the companion layout
    mat = _companion(process.coefficients)
    power = np.linalg.matrix_power(mat, horizon)
    mean = float(power[0] @ state)
    var = 0.0
    step = np.eye(p)
    for _ in range(horizon):
        var += step[0, 0] ** 2
        step = mat @ step
    return mean, var * process.noise_std**2


def gaussian_crps(mean: float, std: float, y: float) -> float:
    """Closed-form CRPS of a Gaussian predictive distribution at outcome y."""
    if std <= 0:
        raise ValueError("std must be positive")
    z = (y - mean) / std
    pdf = math.exp(-z * z / 2.0) / math.sqrt(2.0 * math.pi)
    cdf = 0.5 * (1.0 + math.erf(z / math.sqrt(2.0)))
    return std * (z * (2.0 * cdf - 1.0) + 2.0 * pdf - 1.0 / math.sqrt(math.pi))


def persistence_forecast(values, horizon: int) -> np.ndarray:
    """The naive forecaster: predict x[t + horizon] as x[t].

    Returns forecasts aligned with truth[horizon:], i.e. values[:-horizon].
    """
    x = np.asarray(values, dtype=np.float64).ravel()
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    if x.size <= horizon:
        raise ValueError(f"series of {x.size} points too short for horizon {horizon}")
    return x[:-horizon].copy()


def uniformity_ks(samples) -> float:
    """Kolmogorov-Smirnov distance between pooled samples and U[0, 1]."""
    s = np.sort(np.asarray(samples, dtype=np.float64).ravel())
    n = s.size
    if n < 100:
        raise ValueError(f"need at least 100 samples, got {n}")
    if s[0] < 0.0 or s[-1] > 1.0:
        raise ValueError("samples outside [0, 1]")
    i = np.arange(1, n + 1, dtype=np.float64)
    return float(np.max(np.maximum(i / n - s, s - (i - 1) / n)))


def independence_autocorr(values, max_lag: int) -> np.ndarray:
    """Sample autocorrelation at lags 1..max_lag, per coordinate.

    Input [N] or [N, d]; output [max_lag] or [max_lag, d].
    """
    x = np.asarray(values, dtype=np.float64)
    squeeze = x.ndim == 1
    if squeeze:
        x = x[:, None]
    n = x.shape[0]
    if max_lag < 1:
        raise ValueError("max_lag must be >= 1")
    if n < 10 * max_lag:
        raise ValueError(f"need at least {10 * max_lag} points for lag {max_lag}, got {n}")
    if (np.ptp(x, axis=0) == 0.0).any():
        raise ValueError("constant sequence has no autocorrelation")
    centered = x - x.mean(axis=0)
    denom = np.sum(centered * centered, axis=0)
    rho = np.empty((max_lag, x.shape[1]))
    for k in range(1, max_lag + 1):
        rho[k - 1] = np.sum(centered[:-k] * centered[k:], axis=0) / denom
    return rho[:, 0] if squeeze else rho
