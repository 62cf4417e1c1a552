import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ncofdm.config import build_system_config, random_symbols
from ncofdm.derivative_oracle import (
    NonOversampledGrid,
    cyclic_derivative,
    downsample_to_grid,
    kernel,
    oversampling_factor,
)
from ncofdm.td_smoother import build_basis_set, evaluate_derivatives
from ncofdm.tx import body, idft_modulate

CFG = build_system_config(8, 32, 4, 2)  # basis up to order 4


def spectral(X, cfg, v):
    return np.array([evaluate_derivatives(X, n, v, cfg)[..., v] for n in range(cfg.N)]).T


def test_kernel_phase_convention():
    # stored basis index i holds the zero-phase kernel at n = i
    g = kernel(build_basis_set(CFG), 0, CFG.N)
    n = np.arange(CFG.N)
    ref = np.exp(2j * np.pi * np.outer(n, CFG.k) / CFG.N).sum(axis=1) / CFG.N
    assert np.allclose(g, ref, atol=1e-15)


@pytest.mark.parametrize("v", range(5))
def test_matches_spectral_derivatives(v, rng):
    X = random_symbols(rng, 3, CFG)
    grid = downsample_to_grid(body(idft_modulate(X, CFG), CFG), CFG)
    got = cyclic_derivative(grid, build_basis_set(CFG), v)
    assert np.abs(got - spectral(X, CFG, v)).max() < 1e-10


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(0, 4))
def test_random_symbols_property(seed, v):
    X = random_symbols(np.random.default_rng(seed), 1, CFG)[0]
    grid = downsample_to_grid(body(idft_modulate(X, CFG), CFG), CFG)
    assert np.abs(cyclic_derivative(grid, build_basis_set(CFG), v) - spectral(X, CFG, v)).max() < 1e-10


@pytest.mark.parametrize("v", range(5))
def test_two_subband_superposition(v, rng):
    lo = build_system_config(4, 32, 4, 2, subcarriers=[-4, -3, -2, -1])
    hi = build_system_config(4, 32, 4, 2, subcarriers=[0, 1, 2, 3])
    X = random_symbols(rng, 1, CFG)[0]
    Xlo, Xhi = X[:4], X[4:]
    full = cyclic_derivative(downsample_to_grid(body(idft_modulate(X, CFG), CFG), CFG), build_basis_set(CFG), v)
    # each subband sampled on the full-band grid, then reconstructed with its own kernel
    parts = []
    for sub, Xs in ((lo, Xlo), (hi, Xhi)):
        comb = downsample_to_grid(body(idft_modulate(Xs, sub), sub), CFG)
        parts.append(cyclic_derivative(comb, build_basis_set(sub), v))
    assert np.abs(parts[0] + parts[1] - full).max() < 1e-10
    assert np.abs(full - spectral(X, CFG, v)).max() < 1e-10


def test_full_band_identity():
    cfg = build_system_config(32, 32, 4, 0)
    X = random_symbols(np.random.default_rng(1), 1, cfg)[0]
    y = body(idft_modulate(X, cfg), cfg)
    grid = downsample_to_grid(y, cfg)
    assert grid.J == 1
    assert np.allclose(cyclic_derivative(grid, build_basis_set(cfg), 0), y, atol=1e-15)


def test_zero_grid():
    grid = NonOversampledGrid(np.zeros(CFG.N, dtype=complex), 4)
    assert not np.any(cyclic_derivative(grid, build_basis_set(CFG), 3))


def test_errors():
    with pytest.raises(ValueError):
        oversampling_factor(build_system_config(12, 32, 4, 0))
    with pytest.raises(ValueError):
        downsample_to_grid(np.zeros(31), CFG)
    with pytest.raises(ValueError):
        kernel(build_basis_set(CFG), 5, CFG.N)
