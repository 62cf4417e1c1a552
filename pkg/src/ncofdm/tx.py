"""CP-OFDM modulation and frame-aligned sample streams.

Symbols use the ``1/N`` IDFT convention

    y(n) = (1/N) * sum_k X_k exp(j 2 pi k n / N),   n = -N_cp .. N-1

so a unit-energy constellation gives ``sum_n |y(n)|^2 = K/N`` over the body.
Arrays of symbols are laid out with samples along the last axis; storage
index ``i`` holds sample ``n = i - N_cp``.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .config import SystemConfig


def spectrum_grid(X: np.ndarray, cfg: SystemConfig) -> np.ndarray:
    """Scatter ``(..., K)`` subcarrier values onto ``(..., N)`` FFT bins."""
    X = np.asarray(X)
    if X.shape[-1] != cfg.K:
        raise ValueError(f"expected {cfg.K} subcarrier values, got {X.shape[-1]}")
    grid = np.zeros(X.shape[:-1] + (cfg.N,), dtype=complex)
    grid[..., cfg.bins()] = X
    return grid


def idft_modulate(X: np.ndarray, cfg: SystemConfig) -> np.ndarray:
    """Time samples for ``n in [-N_cp, N-1]``; batched over leading axes."""
    body = np.fft.ifft(spectrum_grid(X, cfg), axis=-1)  # numpy's ifft already carries 1/N
    if cfg.N_cp == 0:
        return body
    return np.concatenate([body[..., cfg.N - cfg.N_cp:], body], axis=-1)


def evaluate_at(X: np.ndarray, n: int | np.ndarray, cfg: SystemConfig) -> np.ndarray:
    """Direct evaluation of the modulator sum at arbitrary integer ``n``."""
    n = np.asarray(n)
    ph = np.exp(2j * np.pi * np.mod(np.multiply.outer(cfg.k, n), cfg.N) / cfg.N)
    return np.tensordot(np.asarray(X), ph, axes=([-1], [0])) / cfg.N


def body(symbols: np.ndarray, cfg: SystemConfig) -> np.ndarray:
    """Strip the cyclic prefix: samples ``n = 0 .. N-1``."""
    return np.asarray(symbols)[..., cfg.N_cp:cfg.N_cp + cfg.N]


def dft_demodulate(symbols: np.ndarray, cfg: SystemConfig) -> np.ndarray:
    """Inverse of :func:`idft_modulate` on the active subcarriers."""
    return np.fft.fft(body(symbols, cfg), axis=-1)[..., cfg.bins()]


@dataclass
class SampleStream:
    """Concatenated frames of ``frame_len`` samples each."""

    samples: np.ndarray
    frame_len: int

    def __post_init__(self) -> None:
        self.samples = np.asarray(self.samples)
        if self.samples.ndim != 1:
            raise ValueError("stream samples must be one-dimensional")
        if self.frame_len <= 0 or self.samples.size % self.frame_len:
            raise ValueError("stream length is not a whole number of frames")

    @property
    def symbol_count(self) -> int:
        return self.samples.size // self.frame_len

    def frames(self) -> np.ndarray:
        return self.samples.reshape(self.symbol_count, self.frame_len)

    def junctions(self) -> np.ndarray:
        """Index of the first sample of every frame after the first."""
        return np.arange(1, self.symbol_count) * self.frame_len

    def mean_power(self) -> float:
        return float(np.mean(np.abs(self.samples) ** 2))


def assemble_stream(symbols: Sequence[np.ndarray] | np.ndarray) -> SampleStream:
    """Concatenate symbols in order without overlap or windowing."""
    if isinstance(symbols, np.ndarray) and symbols.ndim == 2:
        return SampleStream(symbols.reshape(-1), symbols.shape[1])
    symbols = [np.asarray(s) for s in symbols]
    if not symbols:
        raise ValueError("no symbols to assemble")
    lengths = {s.shape[-1] for s in symbols}
    if len(lengths) != 1:
        raise ValueError(f"mixed frame lengths {sorted(lengths)}")
    return SampleStream(np.concatenate(symbols), lengths.pop())


def write_iq(path: str | Path, samples: np.ndarray) -> None:
    """Interleaved little-endian float64 (re, im) pairs."""
    s = np.asarray(samples, dtype=np.complex128).reshape(-1)
    inter = np.empty(2 * s.size, dtype="<f8")
    inter[0::2] = s.real
    inter[1::2] = s.imag
    Path(path).write_bytes(inter.tobytes())


def read_iq(path: str | Path) -> np.ndarray:
    raw = np.frombuffer(Path(path).read_bytes(), dtype="<f8")
    if raw.size % 2:
        raise ValueError("IQ file holds an odd number of floats")
    return raw[0::2] + 1j * raw[1::2]
