"""System configuration, constellation mapping and the config-file reader.

All other modules consume a :class:`SystemConfig`. Time quantities are never
stored; they are derived from ``N``, ``N_cp`` and ``delta_f``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Any, Iterable, Mapping

import numpy as np

MODULATION_ORDERS = {"BPSK": 2, "QPSK": 4, "16QAM": 16, "64QAM": 64, "256QAM": 256}


class ConfigError(ValueError):
    """Raised for parameter sets that violate the configuration invariants."""


def _canonical_modulation(name: str) -> str:
    key = str(name).upper().replace("-", "").replace("_", "")
    aliases = {"4QAM": "QPSK", "16QAM": "16QAM", "QAM16": "16QAM", "QAM64": "64QAM", "QAM256": "256QAM"}
    key = aliases.get(key, key)
    if key not in MODULATION_ORDERS:
        raise ConfigError(f"unknown modulation {name!r}; expected one of {sorted(MODULATION_ORDERS)}")
    return key


@dataclass(frozen=True)
class SystemConfig:
    """Waveform parameters shared by every module.

    Attributes
    ----------
    K : int
        Number of active subcarriers.
    N : int
        IDFT length (samples per useful symbol body, oversampled).
    N_cp : int
        Cyclic-prefix length in samples.
    subcarriers : tuple of int
        Active subcarrier indices, each in ``[-N/2, N/2 - 1]``.
    V : int
        Maximum derivative order kept continuous across symbol junctions.
    delta_f : float
        Subcarrier spacing in Hz.
    modulation : str
        Constellation name (``"QPSK"``, ``"16QAM"``, ...), unit average energy.
    """

    K: int
    N: int
    N_cp: int
    subcarriers: tuple[int, ...]
    V: int
    delta_f: float = 15e3
    modulation: str = "16QAM"
    k: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        if self.K < 1 or self.N < 1:
            raise ConfigError("K and N must be positive")
        if self.K > self.N:
            raise ConfigError(f"K={self.K} exceeds the IDFT length N={self.N}")
        if self.N_cp < 0:
            raise ConfigError("N_cp must be non-negative")
        if self.V < 0:
            raise ConfigError("V must be non-negative")
        if self.V + 1 > self.K:
            raise ConfigError("V + 1 continuity constraints need at least V + 1 subcarriers")
        if self.delta_f <= 0:
            raise ConfigError("delta_f must be positive")
        if len(self.subcarriers) != self.K:
            raise ConfigError(f"{len(self.subcarriers)} subcarrier indices given for K={self.K}")
        if len(set(self.subcarriers)) != self.K:
            raise ConfigError("duplicate subcarrier indices")
        lo, hi = -(self.N // 2), self.N - self.N // 2 - 1
        if min(self.subcarriers) < lo or max(self.subcarriers) > hi:
            raise ConfigError(f"subcarrier indices must lie in [{lo}, {hi}]")
        object.__setattr__(self, "modulation", _canonical_modulation(self.modulation))
        k = np.asarray(self.subcarriers, dtype=np.int64)
        k.setflags(write=False)
        object.__setattr__(self, "k", k)

    @property
    def phi(self) -> float:
        """CP phase constant ``-2*pi*N_cp/N``."""
        return -2.0 * math.pi * self.N_cp / self.N

    @property
    def frame_len(self) -> int:
        return self.N_cp + self.N

    @property
    def bits_per_symbol(self) -> int:
        return int(math.log2(MODULATION_ORDERS[self.modulation]))

    @property
    def sample_rate(self) -> float:
        return self.N * self.delta_f

    @property
    def T_s(self) -> float:
        return 1.0 / self.delta_f

    @property
    def T_cp(self) -> float:
        return self.N_cp / self.sample_rate

    @property
    def T_samp(self) -> float:
        return 1.0 / self.sample_rate

    def bins(self) -> np.ndarray:
        """Positions of the active subcarriers in an N-point FFT output."""
        return np.mod(self.k, self.N)

    def is_contiguous(self) -> bool:
        k = np.sort(self.k)
        return bool(np.all(np.diff(k) == 1))

    def with_V(self, V: int) -> "SystemConfig":
        return SystemConfig(self.K, self.N, self.N_cp, self.subcarriers, V, self.delta_f, self.modulation)

    def to_dict(self) -> dict[str, Any]:
        return {
            "K": self.K,
            "N": self.N,
            "N_cp": self.N_cp,
            "V": self.V,
            "delta_f": self.delta_f,
            "modulation": self.modulation,
            "subcarriers": "contiguous" if self.subcarriers == default_subcarriers(self.K) else list(self.subcarriers),
        }


def default_subcarriers(K: int) -> tuple[int, ...]:
    """The symmetric block ``{-K/2, ..., K/2 - 1}`` (``K`` odd rounds down)."""
    start = -(K // 2)
    return tuple(range(start, start + K))


def build_system_config(
    K: int,
    N: int,
    N_cp: int,
    V: int,
    constellation: str = "16QAM",
    subcarriers: Iterable[int] | None = None,
    delta_f: float = 15e3,
) -> SystemConfig:
    """Validate parameters and return an immutable :class:`SystemConfig`."""
    sc = default_subcarriers(K) if subcarriers is None else tuple(int(i) for i in subcarriers)
    return SystemConfig(int(K), int(N), int(N_cp), sc, int(V), float(delta_f), constellation)


def lte_config(V: int = 2) -> SystemConfig:
    """256 subcarriers, 2048-point IDFT, 144-sample CP, 16-QAM, 15 kHz."""
    return build_system_config(256, 2048, 144, V, "16QAM")


# ---------------------------------------------------------------------------
# constellation


def _gray(i: np.ndarray) -> np.ndarray:
    return i ^ (i >> 1)


@lru_cache(maxsize=None)
def constellation(modulation: str) -> np.ndarray:
    """Points indexed by integer label (MSB-first bit pattern).

    Square QAM is built from two Gray-coded PAM axes: the first half of the
    label bits selects the in-phase level, the second half the quadrature
    level. Level ``i`` of an L-level axis has amplitude ``L - 1 - 2i`` and
    carries the Gray code of ``i``, so the all-zero label is the
    ``(+max, +max)`` corner. Scaled to unit mean energy.
    """
    modulation = _canonical_modulation(modulation)
    M = MODULATION_ORDERS[modulation]
    if modulation == "BPSK":
        pts = np.array([1.0 + 0j, -1.0 + 0j])
        pts.setflags(write=False)
        return pts
    bits = int(math.log2(M))
    half = bits // 2
    L = 1 << half
    idx = np.arange(L)
    amp = np.empty(L)
    amp[_gray(idx)] = L - 1 - 2 * idx
    labels = np.arange(M)
    i_lab, q_lab = labels >> half, labels & (L - 1)
    pts = amp[i_lab] + 1j * amp[q_lab]
    pts = pts / math.sqrt(np.mean(np.abs(pts) ** 2))
    pts.setflags(write=False)
    return pts


def bit_table(modulation: str) -> list[tuple[str, complex]]:
    """Human-readable ``(bits, point)`` table for documentation and fixtures."""
    pts = constellation(modulation)
    nb = int(math.log2(len(pts)))
    return [(format(i, f"0{nb}b"), complex(p)) for i, p in enumerate(pts)]


def qam_map(bits: np.ndarray, cfg: SystemConfig | str) -> np.ndarray:
    """Map bits onto constellation points.

    ``bits`` may be a flat array of ``K*log2(M)`` bits (one symbol) or an
    array of shape ``(S, K*log2(M))``; the output has shape ``(K,)`` or
    ``(S, K)`` accordingly. When a modulation name is given instead of a
    config, any multiple of ``log2(M)`` bits is accepted.
    """
    mod = cfg if isinstance(cfg, str) else cfg.modulation
    pts = constellation(mod)
    nb = int(math.log2(len(pts)))
    b = np.asarray(bits)
    if not isinstance(cfg, str):
        need = cfg.K * nb
        if b.shape[-1] != need:
            raise ValueError(f"expected {need} bits per symbol, got {b.shape[-1]}")
    elif b.shape[-1] % nb:
        raise ValueError(f"bit count {b.shape[-1]} is not a multiple of {nb}")
    if b.size and (b.min() < 0 or b.max() > 1):
        raise ValueError("bits must be 0 or 1")
    grouped = b.reshape(b.shape[:-1] + (-1, nb)).astype(np.int64)
    labels = grouped @ (1 << np.arange(nb - 1, -1, -1))
    return pts[labels]


def qam_demap(symbols: np.ndarray, cfg: SystemConfig | str, chunk: int = 1 << 16) -> np.ndarray:
    """Hard minimum-distance decision back to bits.

    Exact ties resolve to the smallest label, i.e. the lexicographically
    smallest bit pattern. Output shape is ``symbols.shape[:-1] + (K*log2 M,)``.
    """
    mod = cfg if isinstance(cfg, str) else cfg.modulation
    pts = constellation(mod)
    nb = int(math.log2(len(pts)))
    s = np.asarray(symbols, dtype=complex)
    flat = s.reshape(-1)
    labels = np.empty(flat.size, dtype=np.int64)
    # ties are declared within a few ulps so that midpoints computed in
    # floating point still break deterministically
    for start in range(0, flat.size, chunk):
        blk = flat[start:start + chunk, None]
        d2 = np.abs(blk - pts[None, :]) ** 2
        dmin = d2.min(axis=1, keepdims=True)
        near = d2 <= dmin * (1.0 + 1e-9) + 1e-300
        labels[start:start + chunk] = np.argmax(near, axis=1)
    bits = (labels[:, None] >> np.arange(nb - 1, -1, -1)) & 1
    return bits.reshape(s.shape[:-1] + (s.shape[-1] * nb,)).astype(np.uint8)


def random_bits(rng: np.random.Generator, n_symbols: int, cfg: SystemConfig) -> np.ndarray:
    return rng.integers(0, 2, size=(n_symbols, cfg.K * cfg.bits_per_symbol), dtype=np.uint8)


def random_symbols(rng: np.random.Generator, n_symbols: int, cfg: SystemConfig) -> np.ndarray:
    """Uniform random constellation points, shape ``(n_symbols, K)``."""
    pts = constellation(cfg.modulation)
    return pts[rng.integers(0, len(pts), size=(n_symbols, cfg.K))]


# ---------------------------------------------------------------------------
# config file

CONFIG_KEYS = {"K", "N", "N_cp", "V", "modulation", "seed"}


def load_config_file(path: str | Path) -> dict[str, Any]:
    """Read a flat JSON key/value scenario file."""
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("config file must hold a JSON object")
    for key, value in data.items():
        if isinstance(value, dict):
            raise ConfigError(f"config must be flat; key {key!r} holds an object")
    return data


def config_from_mapping(data: Mapping[str, Any]) -> SystemConfig:
    missing = {"K", "N", "N_cp"} - set(data)
    if missing:
        raise ConfigError(f"config is missing keys {sorted(missing)}")
    V = data.get("V", 2)
    if isinstance(V, list):
        V = max(V) if V else 0
    try:
        return build_system_config(
            int(data["K"]),
            int(data["N"]),
            int(data["N_cp"]),
            int(V),
            data.get("modulation", "16QAM"),
            data.get("subcarriers"),
            float(data.get("delta_f", 15e3)),
        )
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from exc
