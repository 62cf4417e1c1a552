"""Derivative reconstruction by cyclic convolution.

An oversampled symbol is fully determined by its samples on the coarse grid
``n = J m`` (``J = N / K``). Convolving that comb, cyclically over ``N``, with
the order-``v`` basis kernel reproduces the order-``v`` derivative of the
symbol body. This gives a route to derivatives that shares nothing with the
spectral evaluation in :mod:`ncofdm.td_smoother` beyond the kernel itself.

Kernel phase convention: the stored basis vectors run over
``n = -N_cp .. N-1`` and carry the CP phase ``exp(-j phi k)``, which is a
shift by ``N_cp`` samples. Storage index ``i`` therefore holds the
zero-phase kernel at ``n = i``, so the first ``N`` stored samples *are* the
convolution kernel over one period.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import SystemConfig
from .td_smoother import BasisSet


@dataclass(frozen=True)
class NonOversampledGrid:
    values: np.ndarray  # length N, nonzero only at multiples of J
    J: int


def oversampling_factor(cfg: SystemConfig) -> int:
    if cfg.N % cfg.K:
        raise ValueError(f"N={cfg.N} is not a multiple of K={cfg.K}")
    return cfg.N // cfg.K


def downsample_to_grid(y_body: np.ndarray, cfg: SystemConfig) -> NonOversampledGrid:
    """Keep ``y(Jm)``, zero elsewhere. ``y_body`` holds ``n = 0 .. N-1``."""
    J = oversampling_factor(cfg)
    y_body = np.asarray(y_body)
    if y_body.shape[-1] != cfg.N:
        raise ValueError(f"expected a body of {cfg.N} samples")
    comb = np.zeros_like(y_body, dtype=complex)
    comb[..., ::J] = y_body[..., ::J]
    return NonOversampledGrid(comb, J)


def kernel(basis: BasisSet, v: int, N: int) -> np.ndarray:
    """Zero-phase order-``v`` kernel over one period."""
    if v > basis.max_order:
        raise ValueError(f"basis holds orders up to {basis.max_order}, asked for {v}")
    return basis.vectors[v, :N]


def cyclic_derivative(grid: NonOversampledGrid, basis: BasisSet, v: int) -> np.ndarray:
    """Order-``v`` derivative of the body, ``n = 0 .. N-1``.

    The comb holds ``1/J`` of the symbol's spectral weight on each active
    subcarrier, hence the factor ``J``.
    """
    N = grid.values.shape[-1]
    g = kernel(basis, v, N)
    conv = np.fft.ifft(np.fft.fft(grid.values, axis=-1) * np.fft.fft(g), axis=-1)
    return grid.J * conv
