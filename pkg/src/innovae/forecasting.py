"""Generative forecasting: encode history, splice fresh uniform draws in place
of the unobserved future innovations, decode, and read distributions off the
resulting Monte-Carlo ensemble.
"""

from __future__ import annotations

from dataclasses import dataclass
from datetime import datetime

import numpy as np
import torch

from .checkpoint import Checkpoint
from .series import SeriesFrame

DEFAULT_SAMPLES = 1000


@dataclass(frozen=True)
class ForecastEnsemble:
    """K exchangeable draws of the value ``horizon`` steps past ``origin_time``."""

    origin_time: datetime
    horizon: int
    samples: np.ndarray  # [K, d], original units
    channels: tuple[str, ...]
    seed: int | None = None

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64)
        if samples.ndim == 1:
            samples = samples[:, None]
        if samples.shape[0] < 1:
            raise ValueError("ensemble needs at least one sample")
        if not np.isfinite(samples).all():
            raise ValueError("non-finite samples in ensemble")
        samples = samples.copy()
        samples.flags.writeable = False
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "channels", tuple(self.channels))

    @property
    def n_samples(self) -> int:
        return self.samples.shape[0]

    def sorted_samples(self) -> np.ndarray:
        """Per-channel ascending view used by the order-statistic readouts."""
        return np.sort(self.samples, axis=0)


@dataclass(frozen=True)
class IntervalForecast:
    level: float
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lower = np.asarray(self.lower, dtype=np.float64)
        upper = np.asarray(self.upper, dtype=np.float64)
        if (lower > upper).any():
            raise ValueError("interval lower bound above upper bound")
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)


def _encoder_latents(ckpt: Checkpoint, history: SeriesFrame, needed: int) -> np.ndarray:
    """Last ``needed`` latent vectors of the history, [needed, latent_dim].

    The series is normalized with the checkpoint's training stats and
    left-padded with the training mean (zero after normalization) so short
    histories of length >= m still yield a full set of latents.
    """
    cfg = ckpt.config
    if history.n_channels != cfg.channels:
        raise ValueError(
            f"history has {history.n_channels} channels, checkpoint expects {cfg.channels}"
        )
    if len(history) < cfg.m:
        raise ValueError(f"history length {len(history)} < m = {cfg.m}")
    normed = (history.values - ckpt.norm_stats.mean) / ckpt.norm_stats.scale
    x = torch.from_numpy(normed.T[None, :, :].copy()).float()
    x = torch.nn.functional.pad(x, (cfg.m - 1, 0))
    nets = ckpt.build()
    with torch.no_grad():
        latents = nets.encoder(x)[0]  # [latent, N]
    return latents.numpy().T[-needed:].astype(np.float64)


def gpf_sample(
    ckpt: Checkpoint,
    history: SeriesFrame,
    horizon: int | None = None,
    n_samples: int = DEFAULT_SAMPLES,
    seed: int | None = 0,
    path: bool = False,
) -> ForecastEnsemble | list[ForecastEnsemble]:
    """Monte-Carlo ensemble of the series ``horizon`` steps past the end of history.

    With ``path=True`` returns one ensemble per intermediate step 1..horizon
    (scenario mode); otherwise a single ensemble for the endpoint.
    """
    cfg = ckpt.config
    t_hor = cfg.horizon if horizon is None else horizon
    if t_hor < 1 or t_hor > cfg.horizon:
        raise ValueError(f"horizon must be in 1..{cfg.horizon} (trained horizon)")
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")

    n_obs = cfg.m - 1 if path else cfg.m - t_hor
    observed = _encoder_latents(ckpt, history, n_obs)  # [n_obs, latent]
    rng = np.random.default_rng(seed)
    pseudo = rng.random((n_samples, t_hor, cfg.latent_dim))

    windows = np.empty((n_samples, n_obs + t_hor, cfg.latent_dim))
    windows[:, :n_obs, :] = observed[None, :, :]
    windows[:, n_obs:, :] = pseudo
    v = torch.from_numpy(windows.transpose(0, 2, 1).copy()).float()
    nets = ckpt.build()
    with torch.no_grad():
        decoded = nets.decoder(v).numpy()  # [K, d, 1] or [K, d, t_hor]
    denorm = decoded.transpose(0, 2, 1) * ckpt.norm_stats.scale + ckpt.norm_stats.mean

    origin = history.time_at(len(history) - 1)
    if path:
        return [
            ForecastEnsemble(
                origin_time=origin,
                horizon=j + 1,
                samples=denorm[:, j, :],
                channels=history.channels,
                seed=seed,
            )
            for j in range(t_hor)
        ]
    return ForecastEnsemble(
        origin_time=origin,
        horizon=t_hor,
        samples=denorm[:, -1, :],
        channels=history.channels,
        seed=seed,
    )


def batched_gpf_samples(
    ckpt: Checkpoint,
    series: SeriesFrame,
    origins: np.ndarray,
    n_samples: int = DEFAULT_SAMPLES,
    seed: int = 0,
    horizon: int | None = None,
) -> list[ForecastEnsemble]:
    """Ensembles at many origin indices of one series, sharing a single
    encoder pass.  Draws are deterministic per (seed, origin, sample index).
    """
    cfg = ckpt.config
    t_hor = cfg.horizon if horizon is None else horizon
    if t_hor < 1 or t_hor > cfg.horizon:
        raise ValueError(f"horizon must be in 1..{cfg.horizon} (trained horizon)")
    origins = np.asarray(origins, dtype=np.int64)
    if origins.size and (origins.min() < cfg.m - 1 or origins.max() >= len(series)):
        raise ValueError("origins must lie in [m-1, len(series))")

    n_obs = cfg.m - t_hor
    all_latents = _encoder_latents(ckpt, series, len(series))  # [N, latent]
    nets = ckpt.build()
    out: list[ForecastEnsemble] = []
    chunk = max(1, 65536 // max(n_samples, 1))
    for lo in range(0, origins.size, chunk):
        batch = origins[lo : lo + chunk]
        windows = np.empty((batch.size, n_samples, cfg.m, cfg.latent_dim))
        for i, t in enumerate(batch):
            rng = np.random.default_rng([seed, int(t)])
            windows[i, :, :n_obs, :] = all_latents[t - n_obs + 1 : t + 1][None, :, :]
            windows[i, :, n_obs:, :] = rng.random((n_samples, t_hor, cfg.latent_dim))
        v = torch.from_numpy(
            windows.reshape(-1, cfg.m, cfg.latent_dim).transpose(0, 2, 1).copy()
        ).float()
        with torch.no_grad():
            decoded = nets.decoder(v).numpy()[:, :, -1]  # [(B*K), d]
        denorm = decoded * ckpt.norm_stats.scale + ckpt.norm_stats.mean
        denorm = denorm.reshape(batch.size, n_samples, cfg.channels)
        for i, t in enumerate(batch):
            out.append(
                ForecastEnsemble(
                    origin_time=series.time_at(int(t)),
                    horizon=t_hor,
                    samples=denorm[i],
                    channels=series.channels,
                    seed=seed,
                )
            )
    return out


def point_mmse(ensemble: ForecastEnsemble) -> np.ndarray:
    """Conditional sample mean, the squared-error-optimal point forecast."""
    return ensemble.samples.mean(axis=0)


def point_mmae(ensemble: ForecastEnsemble) -> np.ndarray:
    """Conditional sample median, the absolute-error-optimal point forecast."""
    s = ensemble.sorted_samples()
    k = s.shape[0]
    if k % 2 == 1:
        return s[(k + 1) // 2 - 1].copy()
    return 0.5 * (s[k // 2 - 1] + s[k // 2])


def _quantile_sorted(s: np.ndarray, q: float) -> np.ndarray:
    """Order-statistic quantile: sample (qK) when qK is an integer, else the
    average of samples ([qK]) and ([qK]+1), 1-based, clamped to the ends."""
    k = s.shape[0]
    qk = q * k
    nearest = round(qk)
    if nearest >= 1 and abs(qk - nearest) < 1e-9 * max(1.0, k):
        return s[min(nearest, k) - 1].copy()
    lo = int(np.floor(qk))
    if lo < 1:
        return s[0].copy()
    if lo >= k:
        return s[k - 1].copy()
    return 0.5 * (s[lo - 1] + s[lo])


def quantile(ensemble: ForecastEnsemble, q: float) -> np.ndarray:
    if not 0.0 < q < 1.0:
        raise ValueError(f"q must be in (0, 1), got {q}")
    return _quantile_sorted(ensemble.sorted_samples(), q)


def interval(ensemble: ForecastEnsemble, level: float) -> IntervalForecast:
    """Central interval of probability ``level``, symmetric around the median
    in probability: bounds at quantiles 0.5 -/+ level/2."""
    if not 0.0 < level < 1.0:
        raise ValueError(f"level must be in (0, 1), got {level}")
    s = ensemble.sorted_samples()
    return IntervalForecast(
        level=level,
        lower=_quantile_sorted(s, 0.5 - level / 2),
        upper=_quantile_sorted(s, 0.5 + level / 2),
    )


def write_ensemble_csv(path, ensembles: list[ForecastEnsemble]) -> None:
    """One row per Monte-Carlo sample: origin_time,horizon_steps,sample_id,<channels>."""
    ensembles = _as_list(ensembles)
    channels = ensembles[0].channels
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("origin_time,horizon_steps,sample_id," + ",".join(channels) + "\n")
        for ens in ensembles:
            stamp = ens.origin_time.isoformat()
            for k in range(ens.n_samples):
                row = ",".join(repr(float(x)) for x in ens.samples[k])
                fh.write(f"{stamp},{ens.horizon},{k},{row}\n")


SUMMARY_COLUMNS = ("mmse", "mmae", "q05", "q25", "q50", "q75", "q95", "lo90", "hi90")


def summarize(ensemble: ForecastEnsemble) -> dict[str, np.ndarray]:
    s = ensemble.sorted_samples()
    band = interval(ensemble, 0.9)
    return {
        "mmse": point_mmse(ensemble),
        "mmae": point_mmae(ensemble),
        "q05": _quantile_sorted(s, 0.05),
        "q25": _quantile_sorted(s, 0.25),
        "q50": _quantile_sorted(s, 0.50),
        "q75": _quantile_sorted(s, 0.75),
        "q95": _quantile_sorted(s, 0.95),
        "lo90": band.lower,
        "hi90": band.upper,
    }


def write_summary_csv(path, ensembles: list[ForecastEnsemble]) -> None:
    """One row per (origin, channel) with point forecasts and quantiles."""
    ensembles = _as_list(ensembles)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("origin_time,channel," + ",".join(SUMMARY_COLUMNS) + "\n")
        for ens in ensembles:
            summary = summarize(ens)
            stamp = ens.origin_time.isoformat()
            for c, name in enumerate(ens.channels):
                row = ",".join(repr(float(summary[col][c])) for col in SUMMARY_COLUMNS)
                fh.write(f"{stamp},{name},{row}\n")


def _as_list(ensembles) -> list[ForecastEnsemble]:
    if isinstance(ensembles, ForecastEnsemble):
        ensembles = [ensembles]
    if not ensembles:
        raise ValueError("no ensembles to write")
    return list(ensembles)
