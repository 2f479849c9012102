"""Time-series containers, normalization, windowing, and rolling splits.

Everything here is a plain value type or a pure function: frames are
immutable after construction, so they are safe to share across threads.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from datetime import datetime, timedelta

import numpy as np

SCALE_FLOOR = 1e-8


@dataclass(frozen=True)
class SeriesFrame:
    """A d-channel series sampled on the regular grid start_time + k * step.

    ``values`` has shape [N, d] with rows in time order.  Finite values are
    required unless ``allow_nan`` is set, which ingest uses for frames whose
    gaps have not been filled yet.
    """

    start_time: datetime
    step: timedelta
    channels: tuple[str, ...]
    values: np.ndarray
    allow_nan: bool = field(default=False, compare=False)

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim == 1:
            values = values[:, None]
        if values.ndim != 2:
            raise ValueError(f"values must be 2-D [N, d], got shape {values.shape}")
        n, d = values.shape
        if n < 1 or d < 1:
            raise ValueError(f"need N >= 1 and d >= 1, got shape {values.shape}")
        channels = tuple(self.channels)
        if len(channels) != d:
            raise ValueError(f"{len(channels)} channel names for {d} channels")
        if len(set(channels)) != len(channels):
            raise ValueError("duplicate channel names")
        if self.step <= timedelta(0):
            raise ValueError("step must be positive")
        if not self.allow_nan and not np.isfinite(values).all():
            raise ValueError("non-finite values; run gap filling first")
        values = values.copy()
        values.flags.writeable = False
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "channels", channels)

    def __len__(self) -> int:
        return self.values.shape[0]

    @property
    def n_channels(self) -> int:
        return self.values.shape[1]

    def time_at(self, index: int) -> datetime:
        return self.start_time + index * self.step

    def timestamps(self) -> list[datetime]:
        return [self.time_at(k) for k in range(len(self))]

    def slice(self, start: int, stop: int) -> "SeriesFrame":
        """Half-open index slice as a new frame."""
        if not 0 <= start < stop <= len(self):
            raise ValueError(f"bad slice [{start}, {stop}) for N={len(self)}")
        return SeriesFrame(
            start_time=self.time_at(start),
            step=self.step,
            channels=self.channels,
            values=self.values[start:stop],
            allow_nan=self.allow_nan,
        )

    def with_values(self, values: np.ndarray, allow_nan: bool = False) -> "SeriesFrame":
        return SeriesFrame(self.start_time, self.step, self.channels, values, allow_nan)


@dataclass(frozen=True)
class NormStats:
    """Per-channel affine normalization: (x - mean) / scale."""

    mean: np.ndarray
    scale: np.ndarray

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=np.float64).ravel()
        scale = np.asarray(self.scale, dtype=np.float64).ravel()
        if mean.shape != scale.shape:
            raise ValueError("mean and scale must have the same length")
        if not (np.isfinite(mean).all() and np.isfinite(scale).all()):
            raise ValueError("non-finite normalization stats")
        if (scale < SCALE_FLOOR).any():
            raise ValueError(f"scale below floor {SCALE_FLOOR}")
        for arr, name in ((mean, "mean"), (scale, "scale")):
            arr = arr.copy()
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)

    @property
    def n_channels(self) -> int:
        return self.mean.shape[0]


def compute_norm_stats(series: SeriesFrame, start: int = 0, stop: int | None = None) -> NormStats:
    """Mean and std over a training index range, std clamped below at SCALE_FLOOR."""
    stop = len(series) if stop is None else stop
    block = series.values[start:stop]
    if block.shape[0] < 1:
        raise ValueError("empty training range")
    mean = block.mean(axis=0)
    scale = np.maximum(block.std(axis=0), SCALE_FLOOR)
    return NormStats(mean=mean, scale=scale)


def normalize(series: SeriesFrame, stats: NormStats) -> SeriesFrame:
    if stats.n_channels != series.n_channels:
        raise ValueError(
            f"stats cover {stats.n_channels} channels, series has {series.n_channels}"
        )
    return series.with_values((series.values - stats.mean) / stats.scale)


def denormalize(series: SeriesFrame, stats: NormStats) -> SeriesFrame:
    if stats.n_channels != series.n_channels:
        raise ValueError(
            f"stats cover {stats.n_channels} channels, series has {series.n_channels}"
        )
    return series.with_values(series.values * stats.scale + stats.mean)


@dataclass(frozen=True)
class WindowBatch:
    """Dense causal windows: window k covers indices [origins[k]-m+1, origins[k]]."""

    origins: np.ndarray
    length: int
    tensor: np.ndarray  # [batch, m, d]

    def __post_init__(self):
        origins = np.asarray(self.origins, dtype=np.int64)
        tensor = np.asarray(self.tensor, dtype=np.float64)
        if tensor.ndim != 3 or tensor.shape[0] != origins.shape[0]:
            raise ValueError("tensor must be [batch, m, d] matching origins")
        if tensor.shape[1] != self.length:
            raise ValueError("window length mismatch")
        object.__setattr__(self, "origins", origins)
        object.__setattr__(self, "tensor", tensor)

    def __len__(self) -> int:
        return self.origins.shape[0]


def make_windows(series: SeriesFrame, m: int, horizon: int) -> WindowBatch:
    """All length-m windows whose horizon-step target still exists.

    Window with origin t covers X[t-m+1 : t+1]; its target is X[t+horizon].
    Origins run over t = m-1 .. N-1-horizon, so the count is N - m - horizon + 1.
    """
    if m < 1:
        raise ValueError("m must be >= 1")
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    n = len(series)
    if n < m + horizon:
        raise ValueError(f"series length {n} < m + horizon = {m + horizon}")
    origins = np.arange(m - 1, n - horizon, dtype=np.int64)
    strided = np.lib.stride_tricks.sliding_window_view(series.values, m, axis=0)
    # sliding_window_view gives [N-m+1, d, m]; window k starts at index k
    tensor = strided[: origins.shape[0]].transpose(0, 2, 1)
    return WindowBatch(origins=origins, length=m, tensor=tensor)


@dataclass(frozen=True)
class RollingSplit:
    """Half-open train/test index ranges with train strictly before test."""

    train: tuple[int, int]
    test: tuple[int, int]

    def __post_init__(self):
        if not (self.train[0] < self.train[1] <= self.test[0] < self.test[1]):
            raise ValueError(f"train {self.train} must precede test {self.test}")


def rolling_splits(
    series: SeriesFrame, train_span: timedelta, test_span: timedelta
) -> list[RollingSplit]:
    """Tile the post-warmup region with test blocks, each trained on the
    immediately preceding train_span.  Partial trailing test blocks are dropped.
    """
    n_train = _span_steps(train_span, series.step, "train_span")
    n_test = _span_steps(test_span, series.step, "test_span")
    n = len(series)
    splits = []
    k = 0
    while n_train + (k + 1) * n_test <= n:
        test_start = n_train + k * n_test
        splits.append(
            RollingSplit(train=(k * n_test, test_start), test=(test_start, test_start + n_test))
        )
        k += 1
    if not splits:
        warnings.warn(
            f"series of {n} steps is too short for one "
            f"{n_train}+{n_test}-step split", stacklevel=2,
        )
    return splits


def _span_steps(span: timedelta, step: timedelta, name: str) -> int:
    ratio = span / step
    steps = round(ratio)
    if steps < 1 or abs(ratio - steps) > 1e-9:
        raise ValueError(f"{name} {span} is not a positive multiple of step {step}")
    return steps
