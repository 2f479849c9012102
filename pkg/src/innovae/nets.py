"""The four networks: causal encoder/decoder and the two Wasserstein critics.

All nets are stacks of unpadded (valid) dilated 1-D convolutions with kernel
size 2, so an output at position t is computed from inputs t-m+1..t only and
causality holds structurally, bit for bit.  The dilation schedule is chosen so
the receptive field is exactly m: shorter would leave part of the window dead,
longer cannot fit the window at all.
"""

from __future__ import annotations

from dataclasses import dataclass, field, asdict

import numpy as np
import torch
from torch import nn

LEAKY_SLOPE = 0.1


def default_dilations(m: int) -> tuple[int, ...]:
    """Doubling dilations, last one clipped, so that 1 + sum == m exactly."""
    remaining = m - 1
    out, width = [], 1
    while remaining > 0:
        d = min(width, remaining)
        out.append(d)
        remaining -= d
        width *= 2
    return tuple(out)


def receptive_field(dilations: tuple[int, ...]) -> int:
    return 1 + sum(dilations)


@dataclass(frozen=True)
class NetConfig:
    """Shared architecture settings for all four networks.

    m is the window length consumed by encoder and decoder; the critics take
    segments of length n = m (innovations) and n - 1 + horizon (reconstructions).
    """

    m: int
    channels: int
    horizon: int = 1
    latent_dim: int | None = None
    hidden: int = 32
    critic_hidden: int | None = None  # None: same width as the autoencoder
    dilations: tuple[int, ...] = ()

    def __post_init__(self):
        if self.m < 2:
            raise ValueError("m must be >= 2")
        if self.channels < 1:
            raise ValueError("channels must be >= 1")
        if self.horizon < 1:
            raise ValueError("horizon must be >= 1")
        if self.m < self.horizon + 1:
            raise ValueError(
                f"m={self.m} must be >= horizon+1={self.horizon + 1} so the forecast "
                "window keeps at least one observed innovation"
            )
        if self.latent_dim is None:
            object.__setattr__(self, "latent_dim", self.channels)
        if self.latent_dim < 1:
            raise ValueError("latent_dim must be >= 1")
        if self.hidden < 1:
            raise ValueError("hidden must be >= 1")
        if self.critic_hidden is None:
            object.__setattr__(self, "critic_hidden", self.hidden)
        if self.critic_hidden < 1:
            raise ValueError("critic_hidden must be >= 1")
        dils = tuple(self.dilations) or default_dilations(self.m)
        if receptive_field(dils) != self.m:
            raise ValueError(
                f"dilations {dils} give receptive field {receptive_field(dils)}, need {self.m}"
            )
        if any(d < 1 for d in dils):
            raise ValueError("dilations must be positive")
        object.__setattr__(self, "dilations", dils)

    @property
    def n(self) -> int:
        """Critic input length for innovation segments."""
        return self.m

    @property
    def depth(self) -> int:
        """Conv layers per network: input projection, dilated stack, head."""
        return len(self.dilations) + 2

    @property
    def recon_len(self) -> int:
        """Critic input length for reconstruction segments."""
        return self.n - 1 + self.horizon

    def to_dict(self) -> dict:
        d = asdict(self)
        d["dilations"] = list(self.dilations)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "NetConfig":
        d = dict(d)
        d["dilations"] = tuple(d.get("dilations", ()))
        return cls(**d)


class CausalStack(nn.Module):
    """Valid dilated conv stack: [B, C_in, L] -> [B, C_out, L - m + 1]."""

    def __init__(self, in_channels: int, out_channels: int, cfg: NetConfig,
                 width: int | None = None):
        super().__init__()
        width = cfg.hidden if width is None else width
        self.dilations = cfg.dilations
        self.proj = nn.Conv1d(in_channels, width, kernel_size=1)
        self.convs = nn.ModuleList(
            nn.Conv1d(width, width, kernel_size=2, dilation=d) for d in cfg.dilations
        )
        self.head = nn.Conv1d(width, out_channels, kernel_size=1)
        self.act = nn.LeakyReLU(LEAKY_SLOPE)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        h = self.act(self.proj(x))
        for conv, d in zip(self.convs, self.dilations):
            h = self.act(conv(h)) + h[..., d:]
        return self.head(h)


class Encoder(nn.Module):
    """Maps an m-window of observations to a latent vector in the open unit cube."""

    def __init__(self, cfg: NetConfig):
        super().__init__()
        self.cfg = cfg
        self.stack = CausalStack(cfg.channels, cfg.latent_dim, cfg)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        """[B, channels, L] with L >= m -> latents [B, latent_dim, L - m + 1]."""
        return torch.sigmoid(self.stack(x))


LOGIT_CLAMP = 1e-6


class Decoder(nn.Module):
    """Maps an m-window of latents back to observation space (unbounded).

    Latents enter twice: raw and through the inverse of the encoder's squash
    (logit).  The second channel hands the stack an unbounded, tail-correct
    basis, so mapping unit-cube draws onto heavy conditional tails does not
    have to be carved out of piecewise-linear units.
    """

    def __init__(self, cfg: NetConfig):
        super().__init__()
        self.cfg = cfg
        self.stack = CausalStack(2 * cfg.latent_dim, cfg.channels, cfg)

    def forward(self, v: torch.Tensor) -> torch.Tensor:
        """[B, latent_dim, L] with L >= m -> reconstructions [B, channels, L - m + 1]."""
        u = v.clamp(LOGIT_CLAMP, 1.0 - LOGIT_CLAMP)
        feat = torch.cat([v, torch.log(u) - torch.log1p(-u)], dim=1)
        return self.stack(feat)


class Critic(nn.Module):
    """Conv backbone, mean over surviving positions, affine head to a scalar."""

    def __init__(self, in_channels: int, cfg: NetConfig):
        super().__init__()
        self.cfg = cfg
        width = cfg.critic_hidden
        self.proj = nn.Conv1d(in_channels, width, kernel_size=1)
        self.convs = nn.ModuleList(
            nn.Conv1d(width, width, kernel_size=2, dilation=d) for d in cfg.dilations
        )
        self.dilations = cfg.dilations
        self.act = nn.LeakyReLU(LEAKY_SLOPE)
        self.fc = nn.Linear(width, 1)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        """[B, C, L] with L >= m -> scores [B]."""
        h = self.act(self.proj(x))
        for conv, d in zip(self.convs, self.dilations):
            h = self.act(conv(h)) + h[..., d:]
        return self.fc(h.mean(dim=2)).squeeze(-1)


@dataclass
class Networks:
    """The trainable bundle; parameters are mutated only by the trainer."""

    config: NetConfig
    encoder: Encoder
    decoder: Decoder
    innovation_critic: Critic
    reconstruction_critic: Critic

    def autoencoder_parameters(self):
        yield from self.encoder.parameters()
        yield from self.decoder.parameters()

    def state_arrays(self) -> dict[str, np.ndarray]:
        """Flat float32 parameter map in a stable registration order."""
        out: dict[str, np.ndarray] = {}
        for prefix, module in self._named_modules():
            for name, tensor in module.state_dict().items():
                out[f"{prefix}.{name}"] = tensor.detach().cpu().numpy().astype(np.float32)
        return out

    def load_state_arrays(self, arrays: dict[str, np.ndarray]) -> None:
        for prefix, module in self._named_modules():
            state = {}
            for name, tensor in module.state_dict().items():
                key = f"{prefix}.{name}"
                if key not in arrays:
                    raise ValueError(f"missing tensor {key}")
                arr = arrays[key]
                if tuple(arr.shape) != tuple(tensor.shape):
                    raise ValueError(
                        f"tensor {key} has shape {tuple(arr.shape)}, expected {tuple(tensor.shape)}"
                    )
                state[name] = torch.from_numpy(np.array(arr, dtype=np.float32, copy=True))
            module.load_state_dict(state)

    def _named_modules(self):
        return (
            ("encoder", self.encoder),
            ("decoder", self.decoder),
            ("innovation_critic", self.innovation_critic),
            ("reconstruction_critic", self.reconstruction_critic),
        )


def build_networks(cfg: NetConfig, seed: int = 0) -> Networks:
    """Fresh networks with reproducible initialization."""
    gen = torch.Generator().manual_seed(seed)
    with _default_generator(gen):
        encoder = Encoder(cfg)
        decoder = Decoder(cfg)
        innovation_critic = Critic(cfg.latent_dim, cfg)
        reconstruction_critic = Critic(cfg.channels, cfg)
    return Networks(cfg, encoder, decoder, innovation_critic, reconstruction_critic)


class _default_generator:
    """Route nn initializers through a private generator, restoring global RNG state."""

    def __init__(self, gen: torch.Generator):
        self.gen = gen

    def __enter__(self):
        self.state = torch.random.get_rng_state()
        torch.random.set_rng_state(self.gen.get_state())
        return self

    def __exit__(self, *exc):
        self.gen.set_state(torch.random.get_rng_state())
        torch.random.set_rng_state(self.state)
        return False


def _as_input(array: np.ndarray, rows: int, cols: int, what: str) -> torch.Tensor:
    arr = np.asarray(array, dtype=np.float64)
    if arr.shape != (rows, cols):
        raise ValueError(f"{what} must have shape [{rows}, {cols}], got {arr.shape}")
    if not np.isfinite(arr).all():
        raise ValueError(f"non-finite values in {what}")
    # [rows=time, cols=channels] -> [1, channels, time]
    return torch.from_numpy(arr.T[None, :, :].copy()).float()


def encode(nets: Networks, window: np.ndarray) -> np.ndarray:
    """One latent vector from one [m, channels] window; every coord in (0, 1)."""
    cfg = nets.config
    x = _as_input(window, cfg.m, cfg.channels, "window")
    with torch.no_grad():
        v = nets.encoder(x)
    return v[0, :, 0].numpy().astype(np.float64)


def decode(nets: Networks, latent_window: np.ndarray) -> np.ndarray:
    """One observation vector from one [m, latent_dim] window of unit-cube latents."""
    cfg = nets.config
    v = _as_input(latent_window, cfg.m, cfg.latent_dim, "latent window")
    if (v < 0).any() or (v > 1).any():
        raise ValueError("latent values outside [0, 1]")
    with torch.no_grad():
        x = nets.decoder(v)
    return x[0, :, 0].numpy().astype(np.float64)


def criticize_innovation(nets: Networks, segment: np.ndarray) -> float:
    cfg = nets.config
    s = _as_input(segment, cfg.n, cfg.latent_dim, "innovation segment")
    with torch.no_grad():
        return float(nets.innovation_critic(s)[0])


def criticize_reconstruction(nets: Networks, segment: np.ndarray) -> float:
    cfg = nets.config
    s = _as_input(segment, cfg.recon_len, cfg.channels, "reconstruction segment")
    with torch.no_grad():
        return float(nets.reconstruction_critic(s)[0])
