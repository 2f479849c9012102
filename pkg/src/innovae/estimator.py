"""Scikit-learn style facade over the functional train/forecast pipeline.

``fit`` learns the autoencoder and critics from one [N, d] array (or a
SeriesFrame), ``transform`` returns the learned latent (innovation) sequence,
``sample`` draws Monte-Carlo futures, and ``predict`` reduces them to the
conditional-mean point forecast.  Hyperparameters are flat constructor
arguments so get_params/set_params and grid search work as usual.
"""

from __future__ import annotations

from datetime import datetime, timedelta

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError
from sklearn.utils.validation import check_array

from .forecasting import ForecastEnsemble, gpf_sample, point_mmse
from .nets import NetConfig
from .series import SeriesFrame
from .training import TrainConfig, train

_FIT_START = datetime(2000, 1, 1)
_FIT_STEP = timedelta(minutes=5)


class GenerativeForecaster(BaseEstimator):
    """Generative probabilistic forecaster for stationary multivariate series."""

    def __init__(
        self,
        window: int = 16,
        horizon: int = 1,
        latent_dim: int | None = None,
        hidden: int = 32,
        critic_hidden: int | None = None,
        lambda_weight: float = 1.0,
        critic_steps: int = 5,
        grad_penalty: float = 10.0,
        lr: float = 1e-3,
        lr_min: float | None = None,
        beta1: float = 0.5,
        beta2: float = 0.9,
        adam_eps: float = 1e-8,
        batch_size: int = 64,
        epochs: int = 20,
        random_state: int = 0,
        threads: int = 1,
        validation_fraction: float = 0.1,
        select: str = "final",
        parameter_averaging: float | None = None,
    ):
        self.window = window
        self.horizon = horizon
        self.latent_dim = latent_dim
        self.hidden = hidden
        self.critic_hidden = critic_hidden
        self.lambda_weight = lambda_weight
        self.critic_steps = critic_steps
        self.grad_penalty = grad_penalty
        self.lr = lr
        self.lr_min = lr_min
        self.beta1 = beta1
        self.beta2 = beta2
        self.adam_eps = adam_eps
        self.batch_size = batch_size
        self.epochs = epochs
        self.random_state = random_state
        self.threads = threads
        self.validation_fraction = validation_fraction
        self.select = select
        self.parameter_averaging = parameter_averaging

    def _as_frame(self, X) -> SeriesFrame:
        if isinstance(X, SeriesFrame):
            return X
        arr = check_array(X, ensure_2d=False, dtype=np.float64)
        if arr.ndim == 1:
            arr = arr[:, None]
        return SeriesFrame(
            start_time=_FIT_START,
            step=_FIT_STEP,
            channels=tuple(f"x{i}" for i in range(arr.shape[1])),
            values=arr,
        )

    def _configs(self, n_channels: int) -> tuple[NetConfig, TrainConfig]:
        net = NetConfig(
            m=self.window,
            channels=n_channels,
            horizon=self.horizon,
            latent_dim=self.latent_dim,
            hidden=self.hidden,
            critic_hidden=self.critic_hidden,
        )
        tr = TrainConfig(
            lambda_weight=self.lambda_weight,
            critic_steps=self.critic_steps,
            grad_penalty=self.grad_penalty,
            lr=self.lr,
            lr_min=self.lr_min,
            beta1=self.beta1,
            beta2=self.beta2,
            adam_eps=self.adam_eps,
            batch_size=self.batch_size,
            epochs=self.epochs,
            seed=self.random_state,
            threads=self.threads,
            validation_fraction=self.validation_fraction,
            select=self.select,
            parameter_averaging=self.parameter_averaging,
        )
        return net, tr

    def fit(self, X, y=None):
        frame = self._as_frame(X)
        net, tr = self._configs(frame.n_channels)
        self.checkpoint_, self.loss_records_ = train(frame, net, tr)
        return self

    def _require_fitted(self):
        if not hasattr(self, "checkpoint_"):
            raise NotFittedError("call fit before using this estimator")

    def transform(self, X) -> np.ndarray:
        """Latent (innovation) sequence, one unit-cube vector per time step.

        The first window-1 outputs are computed on a mean-padded window and
        are warmup values.
        """
        self._require_fitted()
        from .forecasting import _encoder_latents

        frame = self._as_frame(X)
        return _encoder_latents(self.checkpoint_, frame, len(frame))

    def sample(
        self, X, n_samples: int = 1000, horizon: int | None = None,
        random_state: int | None = 0,
    ) -> ForecastEnsemble:
        """Monte-Carlo ensemble of the series ``horizon`` steps past the end of X."""
        self._require_fitted()
        return gpf_sample(
            self.checkpoint_, self._as_frame(X),
            horizon=horizon, n_samples=n_samples, seed=random_state,
        )

    def predict(self, X, n_samples: int = 1000, random_state: int | None = 0) -> np.ndarray:
        """Conditional-mean point forecast for the step ``horizon`` past the end of X."""
        return point_mmse(self.sample(X, n_samples=n_samples, random_state=random_state))
