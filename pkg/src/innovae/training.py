"""Adversarial training of the innovation autoencoder.

Inner loop: both critics climb their Wasserstein objectives (with a gradient
penalty holding them near 1-Lipschitz); outer loop: the autoencoder descends
the weighted sum of the two distances.  Single optimization, alternating
steps, off-the-shelf Adam.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, asdict

import numpy as np
import torch

from .checkpoint import Checkpoint
from .nets import NetConfig, Networks, build_networks
from .series import SeriesFrame, compute_norm_stats, normalize


class TrainingDiverged(RuntimeError):
    """Raised when a loss goes non-finite; message carries the diagnostics."""


@dataclass(frozen=True)
class TrainConfig:
    lambda_weight: float = 1.0
    critic_steps: int = 5
    grad_penalty: float = 10.0
    lr: float = 1e-3
    lr_min: float | None = None  # cosine-decay floor; None keeps lr constant
    beta1: float = 0.5
    beta2: float = 0.9
    adam_eps: float = 1e-8
    batch_size: int = 64
    epochs: int = 20
    seed: int = 0
    threads: int = 1
    validation_fraction: float = 0.1
    select: str = "final"  # or "best": lowest validation loss seen
    # EMA decay for the exported encoder/decoder weights; None exports the raw
    # final weights.  Averaging damps the parameter oscillation adversarial
    # updates leave near the equilibrium.
    parameter_averaging: float | None = None

    def __post_init__(self):
        if self.critic_steps < 1 or self.batch_size < 1 or self.epochs < 1:
            raise ValueError("critic_steps, batch_size, epochs must be >= 1")
        if self.lr <= 0 or self.grad_penalty < 0 or self.adam_eps <= 0:
            raise ValueError("lr and adam_eps must be positive, grad_penalty >= 0")
        if self.lr_min is not None and not 0 < self.lr_min <= self.lr:
            raise ValueError("lr_min must be in (0, lr]")
        if self.parameter_averaging is not None and not 0.0 < self.parameter_averaging < 1.0:
            raise ValueError("parameter_averaging must be in (0, 1)")
        if not 0 <= self.validation_fraction < 1:
            raise ValueError("validation_fraction must be in [0, 1)")
        if self.select not in ("final", "best"):
            raise ValueError("select must be 'final' or 'best'")

    def lr_at(self, epoch: int) -> float:
        """Cosine decay from lr to lr_min across the epoch budget."""
        if self.lr_min is None or self.epochs <= 1:
            return self.lr
        frac = epoch / (self.epochs - 1)
        return self.lr_min + 0.5 * (self.lr - self.lr_min) * (1.0 + np.cos(np.pi * frac))


@dataclass(frozen=True)
class LossRecord:
    epoch: int
    innovation_w: float
    reconstruction_w: float
    total: float
    innovation_critic_loss: float
    reconstruction_critic_loss: float
    validation_total: float | None
    wall_time: float

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)


def draw_reference_uniform(
    batch: int, n: int, latent_dim: int, rng: np.random.Generator
) -> np.ndarray:
    """IID uniform reference segments, shape [batch, n, latent_dim]."""
    return rng.random((batch, n, latent_dim))


def gradient_penalty(
    critic, real: torch.Tensor, fake: torch.Tensor, rng: np.random.Generator
) -> torch.Tensor:
    """Mean over random interpolates of (||grad_x critic(x)||_2 - 1)^2."""
    if real.shape != fake.shape:
        raise ValueError(f"real {tuple(real.shape)} and fake {tuple(fake.shape)} differ")
    eps_shape = (real.shape[0],) + (1,) * (real.dim() - 1)
    eps = torch.from_numpy(rng.random(eps_shape)).to(real.dtype)
    interp = (eps * real + (1.0 - eps) * fake).detach().requires_grad_(True)
    scores = critic(interp)
    grads = torch.autograd.grad(
        scores.sum(), interp, create_graph=True, retain_graph=True
    )[0]
    norms = grads.flatten(start_dim=1).norm(2, dim=1)
    return ((norms - 1.0) ** 2).mean()


@dataclass
class LossComponents:
    """Differentiable pieces of the training objective for one batch."""

    innovation_w: torch.Tensor
    reconstruction_w: torch.Tensor
    total: torch.Tensor
    innovation_fake: torch.Tensor  # latent segments fed to the innovation critic
    recon_real: torch.Tensor
    recon_fake: torch.Tensor


def segment_span(cfg: NetConfig) -> int:
    """Real-data length needed per training origin: encoder warmup for the
    critic's oldest latent, then the window itself, then the horizon."""
    return 2 * cfg.m - 1 + cfg.horizon


def autoencoder_segments(nets: Networks, segments: torch.Tensor):
    """Latent windows and (real, decoder-substituted) reconstruction segments
    for a batch of [B, channels, span] training segments.

    The substituted segment keeps the real context and replaces only the last
    ``horizon`` values with decoder output, so matching its law forces the
    decoder to reproduce the joint of (context, future), not just a marginal.
    """
    cfg = nets.config
    m = cfg.m
    if segments.shape[1] != cfg.channels or segments.shape[2] != segment_span(cfg):
        raise ValueError(
            f"segments must be [B, {cfg.channels}, {segment_span(cfg)}], "
            f"got {tuple(segments.shape)}"
        )
    latents = nets.encoder(segments)  # [B, latent, m + horizon]
    recon = nets.decoder(latents)  # [B, channels, horizon + 1]
    innovation_fake = latents[..., : cfg.n]
    recon_real = segments[..., m:]
    recon_fake = torch.cat([segments[..., m : 2 * m - 1], recon[..., 1:]], dim=2)
    return innovation_fake, recon_real, recon_fake


def batch_loss_components(
    nets: Networks, segments: torch.Tensor, reference: torch.Tensor, lam: float
) -> LossComponents:
    """Both Wasserstein estimates for a batch of [B, channels, span] segments."""
    innovation_fake, recon_real, recon_fake = autoencoder_segments(nets, segments)
    innovation_w = nets.innovation_critic(reference).mean() - nets.innovation_critic(
        innovation_fake
    ).mean()
    reconstruction_w = nets.reconstruction_critic(recon_real).mean() - nets.reconstruction_critic(
        recon_fake
    ).mean()
    total = innovation_w + lam * reconstruction_w
    return LossComponents(
        innovation_w=innovation_w,
        reconstruction_w=reconstruction_w,
        total=total,
        innovation_fake=innovation_fake,
        recon_real=recon_real,
        recon_fake=recon_fake,
    )


GP_SUBSAMPLE = 64  # interpolates per penalty estimate; the estimator is unbiased


class Trainer:
    """Owns the single mutable copy of the networks during optimization."""

    def __init__(self, nets: Networks, cfg: TrainConfig):
        self.nets = nets
        self.cfg = cfg
        self.rng = np.random.default_rng(cfg.seed)
        betas = (cfg.beta1, cfg.beta2)
        self.opt_ae = torch.optim.Adam(
            list(nets.autoencoder_parameters()), lr=cfg.lr, betas=betas, eps=cfg.adam_eps
        )
        self.opt_inn = torch.optim.Adam(
            nets.innovation_critic.parameters(), lr=cfg.lr, betas=betas, eps=cfg.adam_eps
        )
        self.opt_rec = torch.optim.Adam(
            nets.reconstruction_critic.parameters(), lr=cfg.lr, betas=betas, eps=cfg.adam_eps
        )

        self.averaged: dict[str, torch.Tensor] | None = None
        if cfg.parameter_averaging is not None:
            self.averaged = {
                f"{prefix}.{k}": v.detach().clone()
                for prefix, net in (("encoder", nets.encoder), ("decoder", nets.decoder))
                for k, v in net.state_dict().items()
            }

    def update_average(self) -> None:
        """Fold the current encoder/decoder weights into the running average."""
        if self.averaged is None:
            return
        decay = self.cfg.parameter_averaging
        with torch.no_grad():
            for prefix, net in (("encoder", self.nets.encoder), ("decoder", self.nets.decoder)):
                for k, v in net.state_dict().items():
                    self.averaged[f"{prefix}.{k}"].mul_(decay).add_(v, alpha=1.0 - decay)

    def averaged_arrays(self) -> dict[str, np.ndarray]:
        assert self.averaged is not None
        return {k: v.numpy().astype(np.float32) for k, v in self.averaged.items()}

    def set_lr(self, lr: float) -> None:
        """Anneal the autoencoder only; the critics keep the full step size so
        they stay sharp against the slowing generator."""
        for group in self.opt_ae.param_groups:
            group["lr"] = lr

    def reference_for(self, batch: int) -> torch.Tensor:
        cfg = self.nets.config
        ref = draw_reference_uniform(batch, cfg.n, cfg.latent_dim, self.rng)
        return torch.from_numpy(ref.transpose(0, 2, 1).copy()).float()

    def fake_batches(self, segments: torch.Tensor):
        """Latent and reconstruction segments for critic training, detached."""
        with torch.no_grad():
            return autoencoder_segments(self.nets, segments)

    def critic_step(self, segments: torch.Tensor) -> tuple[float, float]:
        return self.critic_step_on(*self.fake_batches(segments))

    def critic_step_on(
        self, v_fake: torch.Tensor, x_real: torch.Tensor, x_fake: torch.Tensor
    ) -> tuple[float, float]:
        nets, cfg = self.nets, self.cfg
        reference = self.reference_for(v_fake.shape[0])
        k = min(GP_SUBSAMPLE, v_fake.shape[0])

        self.opt_inn.zero_grad(set_to_none=True)
        inn_loss = (
            nets.innovation_critic(v_fake).mean()
            - nets.innovation_critic(reference).mean()
            + cfg.grad_penalty
            * gradient_penalty(nets.innovation_critic, reference[:k], v_fake[:k], self.rng)
        )
        inn_loss.backward()
        self.opt_inn.step()
        inn_loss = inn_loss.detach()

        self.opt_rec.zero_grad(set_to_none=True)
        rec_loss = (
            nets.reconstruction_critic(x_fake).mean()
            - nets.reconstruction_critic(x_real).mean()
            + cfg.grad_penalty
            * gradient_penalty(nets.reconstruction_critic, x_real[:k], x_fake[:k], self.rng)
        )
        rec_loss.backward()
        self.opt_rec.step()
        return float(inn_loss), float(rec_loss.detach())

    def autoencoder_step(self, segments: torch.Tensor) -> tuple[float, float, float]:
        nets, cfg = self.nets, self.cfg
        reference = self.reference_for(segments.shape[0])
        self.opt_ae.zero_grad(set_to_none=True)
        parts = batch_loss_components(nets, segments, reference, cfg.lambda_weight)
        parts.total.backward()
        self.opt_ae.step()
        inn = float(parts.innovation_w.detach())
        rec = float(parts.reconstruction_w.detach())
        return inn, rec, inn + cfg.lambda_weight * rec

    def evaluate(self, segments: torch.Tensor) -> tuple[float, float, float]:
        with torch.no_grad():
            parts = batch_loss_components(
                self.nets, segments, self.reference_for(segments.shape[0]), self.cfg.lambda_weight
            )
        inn, rec = float(parts.innovation_w), float(parts.reconstruction_w)
        return inn, rec, inn + self.cfg.lambda_weight * rec


def train(
    series: SeriesFrame,
    net_config: NetConfig,
    train_config: TrainConfig,
    log_sink=None,
) -> tuple[Checkpoint, list[LossRecord]]:
    """Fit the four networks on one series and return the chosen checkpoint.

    Deterministic per seed: every random draw (init, shuffling, reference
    uniforms, penalty interpolates) comes from the two seeded generators.
    """
    cfg, tcfg = net_config, train_config
    if series.n_channels != cfg.channels:
        raise ValueError(f"series has {series.n_channels} channels, config says {cfg.channels}")
    torch.set_num_threads(max(1, tcfg.threads))

    span = segment_span(cfg)
    n_total = len(series)
    n_val = int(round(n_total * tcfg.validation_fraction))
    n_train = n_total - n_val
    if n_train < span + tcfg.batch_size:
        raise ValueError(
            f"insufficient data: {n_train} training steps, need at least "
            f"{span + tcfg.batch_size} for windows of span {span} plus one batch"
        )
    stats = compute_norm_stats(series, 0, n_train)
    normed = normalize(series, stats)
    values = torch.from_numpy(normed.values.T.copy()).float()  # [d, N]

    starts = np.arange(0, n_train - span + 1, dtype=np.int64)
    val_starts = np.arange(n_train - span + 1, n_total - span + 1, dtype=np.int64)
    windows = values.unfold(1, span, 1).permute(1, 0, 2)  # [N-span+1, d, span]

    nets = build_networks(cfg, seed=tcfg.seed)
    trainer = Trainer(nets, tcfg)
    records: list[LossRecord] = []
    best_val = np.inf
    best_params: dict[str, np.ndarray] | None = None
    group = tcfg.batch_size * tcfg.critic_steps
    n_groups = len(starts) // group
    if n_groups < 1:
        raise ValueError(
            f"insufficient data: {len(starts)} training windows cannot fill one "
            f"group of {tcfg.critic_steps} x {tcfg.batch_size}"
        )

    for epoch in range(tcfg.epochs):
        t0 = time.perf_counter()
        trainer.set_lr(tcfg.lr_at(epoch))
        order = trainer.rng.permutation(len(starts))
        inn_sum = rec_sum = 0.0
        critic_inn_sum = critic_rec_sum = 0.0
        ae_steps = 0
        for g in range(n_groups):
            idx = starts[order[g * group : (g + 1) * group]]
            segments = windows[idx]
            # the autoencoder is frozen during critic updates, so its outputs
            # for the whole group can be computed in one pass
            v_fake, x_real, x_fake = trainer.fake_batches(segments)
            for j in range(tcfg.critic_steps):
                sl = slice(j * tcfg.batch_size, (j + 1) * tcfg.batch_size)
                c_inn, c_rec = trainer.critic_step_on(v_fake[sl], x_real[sl], x_fake[sl])
                critic_inn_sum += c_inn
                critic_rec_sum += c_rec
                if not (np.isfinite(c_inn) and np.isfinite(c_rec)):
                    raise TrainingDiverged(
                        f"non-finite critic loss at epoch {epoch} group {g} step {j}: "
                        f"innovation={c_inn} reconstruction={c_rec}"
                    )
            inn, rec, total = trainer.autoencoder_step(segments[-tcfg.batch_size :])
            if not np.isfinite(total):
                raise TrainingDiverged(
                    f"non-finite loss at epoch {epoch} group {g}: "
                    f"innovation={inn} reconstruction={rec}"
                )
            trainer.update_average()
            inn_sum += inn
            rec_sum += rec
            ae_steps += 1

        ae_steps = max(ae_steps, 1)
        val_total = None
        if len(val_starts) > 0:
            v_inn, v_rec, val_total = trainer.evaluate(windows[val_starts])
            if tcfg.select == "best" and val_total < best_val:
                best_val = val_total
                best_params = nets.state_arrays()
        mean_inn = inn_sum / ae_steps
        mean_rec = rec_sum / ae_steps
        n_critic_steps = max(n_groups * tcfg.critic_steps, 1)
        record = LossRecord(
            epoch=epoch,
            innovation_w=mean_inn,
            reconstruction_w=mean_rec,
            total=mean_inn + tcfg.lambda_weight * mean_rec,
            innovation_critic_loss=critic_inn_sum / n_critic_steps,
            reconstruction_critic_loss=critic_rec_sum / n_critic_steps,
            validation_total=val_total,
            wall_time=time.perf_counter() - t0,
        )
        records.append(record)
        if log_sink is not None:
            log_sink.write(record.to_json() + "\n")
            log_sink.flush()

    params = nets.state_arrays()
    if tcfg.select == "best" and best_params is not None:
        params = best_params
    elif trainer.averaged is not None:
        params.update(trainer.averaged_arrays())
    final = records[-1]
    ckpt = Checkpoint(
        config=cfg,
        params=params,
        norm_stats=stats,
        metadata={
            "seed": tcfg.seed,
            "epochs": tcfg.epochs,
            "final_losses": {
                "innovation_w": final.innovation_w,
                "reconstruction_w": final.reconstruction_w,
                "total": final.total,
            },
            "train_config": asdict(tcfg),
        },
    )
    return ckpt, records
