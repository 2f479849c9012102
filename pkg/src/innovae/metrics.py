"""Point and probabilistic forecasting metrics.

Point metrics take truth/forecast pairs over the evaluated range; ``truth``
may carry ``horizon`` extra leading values (the alignment warmup), which are
used by the scaled error's persistence denominator and trimmed elsewhere.
All functions accept an optional boolean ``mask`` selecting the evaluated
points (the three-sigma outlier filter produces one).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, asdict

import numpy as np

from .forecasting import _quantile_sorted


def _align(truth, forecasts, horizon: int = 0, mask=None):
    truth = np.asarray(truth, dtype=np.float64).ravel()
    forecasts = np.asarray(forecasts, dtype=np.float64).ravel()
    if horizon and truth.shape[0] == forecasts.shape[0] + horizon:
        truth = truth[horizon:]
    if truth.shape[0] != forecasts.shape[0]:
        raise ValueError(
            f"{truth.shape[0]} truth values vs {forecasts.shape[0]} forecasts "
            f"(horizon={horizon})"
        )
    if mask is not None:
        mask = np.asarray(mask, dtype=bool).ravel()
        if mask.shape != truth.shape:
            raise ValueError("mask must align with the evaluated range")
        truth, forecasts = truth[mask], forecasts[mask]
    if truth.size == 0:
        raise ValueError("no points left to evaluate")
    return truth, forecasts


def nmse(truth, forecasts, horizon: int = 0, mask=None) -> float:
    """Sum of squared errors over sum of squared truth."""
    x, f = _align(truth, forecasts, horizon, mask)
    denom = float(np.sum(x * x))
    if denom == 0.0:
        raise ValueError("zero denominator: truth is identically zero")
    return float(np.sum((x - f) ** 2)) / denom


def nmae(truth, forecasts, horizon: int = 0, mask=None) -> float:
    """Sum of absolute errors over sum of absolute truth."""
    x, f = _align(truth, forecasts, horizon, mask)
    denom = float(np.sum(np.abs(x)))
    if denom == 0.0:
        raise ValueError("zero denominator: truth is identically zero")
    return float(np.sum(np.abs(x - f))) / denom


def mase(truth, forecasts, horizon: int, mask=None) -> float:
    """Absolute error scaled by the persistence forecaster's absolute error.

    ``truth`` must include the ``horizon`` leading values so the persistence
    reference x[t-horizon] exists for every evaluated point.
    """
    truth = np.asarray(truth, dtype=np.float64).ravel()
    forecasts = np.asarray(forecasts, dtype=np.float64).ravel()
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    if truth.shape[0] != forecasts.shape[0] + horizon:
        raise ValueError(
            f"need len(truth) == len(forecasts) + horizon, got "
            f"{truth.shape[0]} != {forecasts.shape[0]} + {horizon}"
        )
    x, ref = truth[horizon:], truth[:-horizon]
    if mask is not None:
        mask = np.asarray(mask, dtype=bool).ravel()
        if mask.shape != x.shape:
            raise ValueError("mask must align with the evaluated range")
        x, ref, forecasts = x[mask], ref[mask], forecasts[mask]
    denom = float(np.sum(np.abs(x - ref)))
    if denom == 0.0:
        raise ValueError("persistence denominator is zero (constant truth)")
    return float(np.sum(np.abs(x - forecasts))) / denom


def smape(truth, forecasts, horizon: int = 0, mask=None) -> float:
    """Mean of |x - f| / ((|x| + |f|) / 2); points where both are zero are
    skipped (see smape_skip_count), so the value always lies in [0, 2]."""
    x, f = _align(truth, forecasts, horizon, mask)
    scale = (np.abs(x) + np.abs(f)) / 2.0
    valid = scale > 0.0
    if not valid.any():
        return float("nan")
    return float(np.mean(np.abs(x - f)[valid] / scale[valid]))


def smape_skip_count(truth, forecasts, horizon: int = 0, mask=None) -> int:
    x, f = _align(truth, forecasts, horizon, mask)
    return int(np.sum((np.abs(x) + np.abs(f)) == 0.0))


def crps_empirical(samples, y: float) -> float:
    """Squared-integral distance between the ensemble's empirical CDF and the
    outcome's step CDF, via the exact order-statistic identity
    mean|X - y| - mean|X - X'| / 2 over all ordered pairs."""
    s = np.sort(np.asarray(samples, dtype=np.float64).ravel())
    k = s.shape[0]
    if k < 1:
        raise ValueError("empty ensemble")
    mae_term = float(np.mean(np.abs(s - y)))
    i = np.arange(1, k + 1, dtype=np.float64)
    spread_term = float(np.sum(s * (2.0 * i - 1.0 - k))) / (k * k)
    return mae_term - spread_term


def coverage(truth, lower, upper, level: float, mask=None) -> tuple[float, float]:
    """Fraction of truth inside [lower, upper] and its deviation from level."""
    truth = np.asarray(truth, dtype=np.float64).ravel()
    lower = np.asarray(lower, dtype=np.float64).ravel()
    upper = np.asarray(upper, dtype=np.float64).ravel()
    if not truth.shape == lower.shape == upper.shape:
        raise ValueError("truth and interval bounds must align")
    inside = (truth >= lower) & (truth <= upper)
    if mask is not None:
        inside = inside[np.asarray(mask, dtype=bool).ravel()]
    if inside.size == 0:
        raise ValueError("no points left to evaluate")
    cp = float(np.mean(inside))
    return cp, cp - level


def ncw(lower, upper, truth_test, level: float, mask=None) -> float:
    """Mean predicted interval width over the width of the unconditional
    interval formed by the test set's own empirical quantiles."""
    lower = np.asarray(lower, dtype=np.float64).ravel()
    upper = np.asarray(upper, dtype=np.float64).ravel()
    if lower.shape != upper.shape:
        raise ValueError("interval bounds must align")
    widths = upper - lower
    if mask is not None:
        widths = widths[np.asarray(mask, dtype=bool).ravel()]
    test_sorted = np.sort(np.asarray(truth_test, dtype=np.float64).ravel())
    hi = float(_quantile_sorted(test_sorted[:, None], 0.5 + level / 2)[0])
    lo = float(_quantile_sorted(test_sorted[:, None], 0.5 - level / 2)[0])
    if hi - lo <= 0.0:
        raise ValueError("degenerate unconditional interval (test data too concentrated)")
    return float(np.mean(widths)) / (hi - lo)


def sign_agreement_error(truth, medians, mask=None) -> float:
    """Fraction of points whose forecast median disagrees with the truth in
    sign; zero counts as positive on both sides."""
    x, f = _align(truth, medians, 0, mask)
    sx = np.where(x >= 0.0, 1.0, -1.0)
    sf = np.where(f >= 0.0, 1.0, -1.0)
    return float(np.mean(sx != sf))


def outlier_mask(truth, n_sigmas: float = 3.0) -> np.ndarray:
    """True where |x - mean| <= n_sigmas * std; a constant series keeps everything."""
    x = np.asarray(truth, dtype=np.float64).ravel()
    if x.size < 2:
        raise ValueError("need at least two points")
    std = float(x.std())
    if std == 0.0:
        return np.ones_like(x, dtype=bool)
    return np.abs(x - x.mean()) <= n_sigmas * std


@dataclass
class IntervalScore:
    level: float
    cp: float
    cpe: float
    ncw: float


@dataclass
class MetricsReport:
    """Full evaluation record for one forecast run on one channel."""

    nmse: float
    nmae: float
    mase: float
    smape: float
    crps: float | None
    intervals: list[IntervalScore]
    per: float | None
    evaluated: int
    excluded: int
    smape_skipped: int
    meta: dict = field(default_factory=dict)

    def to_json(self) -> str:
        doc = asdict(self)
        doc["intervals"] = {f"{s.level:g}": {"cp": s.cp, "cpe": s.cpe, "ncw": s.ncw}
                            for s in self.intervals}
        return json.dumps(doc, sort_keys=True, indent=2)


def evaluate_forecasts(
    truth,
    mmse_forecasts,
    mmae_forecasts,
    horizon: int,
    interval_bounds: dict[float, tuple[np.ndarray, np.ndarray]] | None = None,
    ensembles=None,
    filter_outliers: bool = False,
    include_sign_error: bool = False,
    meta: dict | None = None,
) -> MetricsReport:
    """Assemble the full report.

    ``truth`` covers the evaluated range plus ``horizon`` leading warmup
    values; all forecast arrays align with truth[horizon:].  ``ensembles``
    is an optional [n, K] array of Monte-Carlo samples for the CRPS.
    """
    truth = np.asarray(truth, dtype=np.float64).ravel()
    x = truth[horizon:] if horizon else truth
    mask = outlier_mask(x) if filter_outliers else np.ones(x.shape[0], dtype=bool)
    excluded = int((~mask).sum())

    crps = None
    if ensembles is not None:
        ens = np.asarray(ensembles, dtype=np.float64)
        if ens.shape[0] != x.shape[0]:
            raise ValueError("one ensemble per evaluated point required")
        crps = float(
            np.mean([crps_empirical(ens[i], x[i]) for i in np.flatnonzero(mask)])
        )

    intervals = []
    for level, (lo, hi) in sorted((interval_bounds or {}).items(), reverse=True):
        cp, cpe = coverage(x, lo, hi, level, mask=mask)
        width = ncw(lo, hi, x[mask], level, mask=mask)
        intervals.append(IntervalScore(level=level, cp=cp, cpe=cpe, ncw=width))

    report = MetricsReport(
        nmse=nmse(truth, mmse_forecasts, horizon, mask=mask),
        nmae=nmae(truth, mmae_forecasts, horizon, mask=mask),
        mase=mase(truth, mmae_forecasts, horizon, mask=mask),
        smape=smape(truth, mmae_forecasts, horizon, mask=mask),
        crps=crps,
        intervals=intervals,
        per=sign_agreement_error(x, mmae_forecasts, mask=mask) if include_sign_error else None,
        evaluated=int(mask.sum()),
        excluded=excluded,
        smape_skipped=smape_skip_count(truth, mmae_forecasts, horizon, mask=mask),
        meta=meta or {},
    )
    return report
