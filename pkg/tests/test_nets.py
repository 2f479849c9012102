import numpy as np
import pytest
import torch

from innovae.nets import (
    NetConfig,
    build_networks,
    criticize_innovation,
    criticize_reconstruction,
    decode,
    default_dilations,
    encode,
    receptive_field,
)


def zeroed(nets):
    nets.load_state_arrays({k: np.zeros_like(v) for k, v in nets.state_arrays().items()})
    return nets


@pytest.fixture
def cfg():
    return NetConfig(m=8, channels=3, horizon=2, latent_dim=3)


def test_default_dilations_hit_exact_receptive_field():
    for m in (2, 3, 5, 8, 10, 16, 33, 100):
        assert receptive_field(default_dilations(m)) == m


def test_config_rejects_short_window():
    with pytest.raises(ValueError):
        NetConfig(m=3, channels=1, horizon=3)
    NetConfig(m=4, channels=1, horizon=3)  # m == horizon + 1 is the floor


def test_config_rejects_wrong_receptive_field():
    with pytest.raises(ValueError):
        NetConfig(m=8, channels=1, dilations=(1, 2, 4, 8))


def test_zero_weights_encode_to_half(cfg):
    nets = zeroed(build_networks(cfg, seed=1))
    v = encode(nets, np.random.default_rng(0).standard_normal((cfg.m, cfg.channels)))
    np.testing.assert_array_equal(v, np.full(cfg.latent_dim, 0.5))


def test_zero_weights_decode_to_zero(cfg):
    nets = zeroed(build_networks(cfg, seed=1))
    x = decode(nets, np.random.default_rng(0).random((cfg.m, cfg.latent_dim)))
    np.testing.assert_array_equal(x, np.zeros(cfg.channels))


def test_zero_weights_critics_score_zero(cfg):
    nets = zeroed(build_networks(cfg, seed=1))
    rng = np.random.default_rng(2)
    assert criticize_innovation(nets, rng.random((cfg.n, cfg.latent_dim))) == 0.0
    assert criticize_reconstruction(
        nets, rng.standard_normal((cfg.recon_len, cfg.channels))
    ) == 0.0


def test_encode_shape_and_range(cfg):
    nets = build_networks(cfg, seed=7)
    v = encode(nets, np.random.default_rng(1).standard_normal((8, 3)))
    assert v.shape == (3,)
    assert np.all((v > 0) & (v < 1))


def test_encode_rejects_bad_shape_and_nonfinite(cfg):
    nets = build_networks(cfg, seed=7)
    with pytest.raises(ValueError):
        encode(nets, np.zeros((7, 3)))
    bad = np.zeros((8, 3))
    bad[0, 0] = np.inf
    with pytest.raises(ValueError):
        encode(nets, bad)


def test_decode_rejects_latents_outside_unit_cube(cfg):
    nets = build_networks(cfg, seed=7)
    w = np.random.default_rng(1).random((cfg.m, cfg.latent_dim))
    w[3, 1] = 1.5
    with pytest.raises(ValueError):
        decode(nets, w)


def test_decode_sensitivity_and_determinism(cfg):
    nets = build_networks(cfg, seed=7)
    rng = np.random.default_rng(5)
    w = rng.random((cfg.m, cfg.latent_dim))
    base = decode(nets, w)
    np.testing.assert_array_equal(base, decode(nets, w))
    newest = w.copy()
    newest[-1, 0] = 1.0 - newest[-1, 0]
    assert not np.array_equal(decode(nets, newest), base)


def test_encoder_causality_is_exact():
    """Changing data outside the m-window never moves V_t; inside does."""
    cfg = NetConfig(m=8, channels=2, horizon=1)
    rng = np.random.default_rng(0)
    series = rng.standard_normal((40, 2))
    for seed in range(5):
        nets = build_networks(cfg, seed=seed)
        x = torch.from_numpy(series.T[None]).float()
        with torch.no_grad():
            base = nets.encoder(x).numpy()
        t_out = 20  # output index; consumes inputs t_out .. t_out + m - 1
        lo, hi = t_out, t_out + cfg.m
        for idx in (lo - 1, hi, 0, 39):
            bumped = series.copy()
            bumped[idx] += 3.0
            xb = torch.from_numpy(bumped.T[None]).float()
            with torch.no_grad():
                out = nets.encoder(xb).numpy()
            assert np.array_equal(out[0, :, t_out], base[0, :, t_out])
        for idx in range(lo, hi):
            bumped = series.copy()
            bumped[idx] += 3.0
            xb = torch.from_numpy(bumped.T[None]).float()
            with torch.no_grad():
                out = nets.encoder(xb).numpy()
            assert not np.array_equal(out[0, :, t_out], base[0, :, t_out])


def test_critic_scores_finite_and_deterministic(cfg):
    nets = build_networks(cfg, seed=3)
    seg = np.random.default_rng(4).random((cfg.n, cfg.latent_dim))
    a, b = criticize_innovation(nets, seg), criticize_innovation(nets, seg)
    assert a == b and np.isfinite(a)
    with pytest.raises(ValueError):
        criticize_innovation(nets, seg[:-1])
    with pytest.raises(ValueError):
        criticize_reconstruction(nets, np.zeros((cfg.recon_len + 1, cfg.channels)))


def test_depth_counts_all_conv_layers():
    cfg = NetConfig(m=16, channels=1)
    assert cfg.depth == len(cfg.dilations) + 2
