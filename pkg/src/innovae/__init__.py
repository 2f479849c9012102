"""Generative probabilistic forecasting for stationary market signals.

A causal autoencoder squeezes each step of a series into an IID-uniform
latent innovation; forecasting splices fresh uniform draws in place of the
unobserved future innovations and decodes Monte-Carlo samples of the
conditional distribution.  Training pits the autoencoder against two
Wasserstein critics: one holding the latents to IID uniform, one holding the
(context, decoded future) joint law to the data's.
"""

from .checkpoint import Checkpoint, CheckpointError, load_checkpoint, save_checkpoint
from .estimator import GenerativeForecaster
from .forecasting import (
    ForecastEnsemble,
    IntervalForecast,
    gpf_sample,
    interval,
    point_mmae,
    point_mmse,
    quantile,
)
from .metrics import MetricsReport, evaluate_forecasts
from .nets import NetConfig
from .series import NormStats, SeriesFrame, normalize, denormalize
from .training import LossRecord, TrainConfig, train

__all__ = [
    "Checkpoint",
    "CheckpointError",
    "ForecastEnsemble",
    "GenerativeForecaster",
    "IntervalForecast",
    "LossRecord",
    "MetricsReport",
    "NetConfig",
    "NormStats",
    "SeriesFrame",
    "TrainConfig",
    "denormalize",
    "evaluate_forecasts",
    "gpf_sample",
    "interval",
    "load_checkpoint",
    "normalize",
    "point_mmae",
    "point_mmse",
    "quantile",
    "save_checkpoint",
    "train",
]

__version__ = "0.1.0"
