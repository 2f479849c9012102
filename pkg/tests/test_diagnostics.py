import numpy as np
import pytest

from innovae.diagnostics import ScalingFit, dfa, hurst_rs


def fractional_gaussian_noise(hurst, n, seed):
    """Davies-Harte circulant embedding; exact fGn covariance."""
    k = np.arange(n + 1, dtype=float)
    gamma = 0.5 * (
        np.abs(k + 1) ** (2 * hurst) - 2 * k ** (2 * hurst) + np.abs(k - 1) ** (2 * hurst)
    )
    row = np.concatenate([gamma, gamma[-2:0:-1]])
    eig = np.fft.fft(row).real
    if (eig < -1e-8).any():
        raise ValueError("embedding not nonnegative definite")
    eig = np.clip(eig, 0.0, None)
    rng = np.random.default_rng(seed)
    m = row.size
    noise = rng.standard_normal(m) + 1j * rng.standard_normal(m)
    sample = np.fft.fft(np.sqrt(eig / (2 * m)) * noise)
    return np.sqrt(2.0) * sample[:n].real


def test_hurst_white_noise_near_half():
    values = [hurst_rs(np.random.default_rng(s).standard_normal(2**14)) for s in range(4)]
    assert abs(np.mean(values) - 0.5) < 0.05


def test_hurst_fgn_recovers_exponent():
    values = [
        hurst_rs(fractional_gaussian_noise(0.8, 2**14, seed=s)) for s in range(4)
    ]
    assert abs(np.mean(values) - 0.8) < 0.07


def test_hurst_constant_series_rejected():
    with pytest.raises(ValueError, match="zero range"):
        hurst_rs(np.full(4096, 1.0))


def test_hurst_short_series_rejected():
    with pytest.raises(ValueError):
        hurst_rs(np.random.default_rng(0).standard_normal(100))


def test_dfa_white_noise_near_half():
    values = [dfa(np.random.default_rng(s).standard_normal(2**14)) for s in range(4)]
    assert abs(np.mean(values) - 0.5) < 0.05


def test_dfa_random_walk_near_three_halves():
    values = [
        dfa(np.cumsum(np.random.default_rng(s).standard_normal(2**14))) for s in range(4)
    ]
    assert abs(np.mean(values) - 1.5) < 0.1


def test_dfa_constant_rejected():
    with pytest.raises(ValueError):
        dfa(np.zeros(4096))


def test_fit_tables_expose_block_sizes():
    x = np.random.default_rng(1).standard_normal(4096)
    fit = hurst_rs(x, return_fit=True)
    assert isinstance(fit, ScalingFit)
    assert len(fit.block_sizes) == len(fit.statistics) >= 3
    assert all(b < c for b, c in zip(fit.block_sizes, fit.block_sizes[1:]))
    fit2 = dfa(x, return_fit=True)
    assert fit2.block_sizes[0] >= 4
