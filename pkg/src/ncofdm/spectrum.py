"""PSD estimation and semi-analytic PSD models.

Measured spectra come from Welch's averaged periodogram; model spectra
evaluate the rectangular-pulse expression and its smoothed-signal
counterpart by Monte Carlo over data draws. Every estimate carries the
linear density and a dB view normalized to the in-band peak.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import signal

from .config import SystemConfig
from .tx import SampleStream


@dataclass
class PsdEstimate:
    freqs: np.ndarray  # Hz, strictly increasing
    psd: np.ndarray  # linear density
    reference: float  # linear level mapped to 0 dB
    segment_count: int = 0
    window: str = ""
    meta: dict = field(default_factory=dict)

    @property
    def psd_db(self) -> np.ndarray:
        with np.errstate(divide="ignore"):
            return 10.0 * np.log10(self.psd / self.reference)

    def at(self, f: float, halfwidth: float = 0.0) -> float:
        """Mean linear density over ``[f - halfwidth, f + halfwidth]`` in dB."""
        if halfwidth <= 0:
            idx = [int(np.argmin(np.abs(self.freqs - f)))]
        else:
            idx = np.flatnonzero(np.abs(self.freqs - f) <= halfwidth)
            if idx.size == 0:
                raise ValueError(f"no frequency bins within {halfwidth} Hz of {f}")
        return float(10.0 * np.log10(np.mean(self.psd[idx]) / self.reference))


def in_band_mask(freqs: np.ndarray, cfg: SystemConfig) -> np.ndarray:
    lo = (cfg.k.min() - 0.5) * cfg.delta_f
    hi = (cfg.k.max() + 0.5) * cfg.delta_f
    return (freqs >= lo) & (freqs <= hi)


def _peak_reference(freqs: np.ndarray, psd: np.ndarray, cfg: SystemConfig) -> float:
    mask = in_band_mask(freqs, cfg)
    if not mask.any():
        raise ValueError("frequency axis does not cover the occupied band")
    return float(psd[mask].max())


def welch_psd(
    stream: SampleStream | np.ndarray,
    cfg: SystemConfig,
    seg_len: int = 2048,
    overlap: int = 512,
    window: str = "hann",
) -> PsdEstimate:
    """Averaged modified periodogram, two-sided and FFT-shifted.

    ``overlap`` is the number of samples shared by adjacent segments.
    """
    x = stream.samples if isinstance(stream, SampleStream) else np.asarray(stream)
    if x.size < seg_len:
        raise ValueError(f"stream of {x.size} samples is shorter than one segment ({seg_len})")
    fs = cfg.sample_rate
    f, p = signal.welch(
        x, fs=fs, window=window, nperseg=seg_len, noverlap=overlap,
        return_onesided=False, detrend=False, scaling="density",
    )
    f, p = np.fft.fftshift(f), np.fft.fftshift(p)
    segments = 1 + (x.size - seg_len) // (seg_len - overlap)
    return PsdEstimate(f, p, _peak_reference(f, p, cfg), segments, f"{window}/{seg_len}/{overlap}")


class WelchAccumulator:
    """Streaming form of :func:`welch_psd` for streams too long to hold.

    Feeding a stream in arbitrary pieces gives the same segments, and the
    same estimate, as one call on the concatenated samples.
    """

    def __init__(self, cfg: SystemConfig, seg_len: int = 2048, overlap: int = 512, window: str = "hann"):
        if not 0 <= overlap < seg_len:
            raise ValueError("overlap must be smaller than the segment length")
        self.cfg = cfg
        self.seg_len, self.hop = seg_len, seg_len - overlap
        self.overlap, self.window = overlap, window
        self._win = signal.get_window(window, seg_len)
        self._scale = 1.0 / (cfg.sample_rate * np.sum(self._win ** 2))
        self._buf = np.zeros(0, dtype=complex)
        self._sum = np.zeros(seg_len)
        self.segments = 0

    def feed(self, samples: np.ndarray) -> None:
        buf = np.concatenate([self._buf, np.asarray(samples, dtype=complex).ravel()])
        n = 0 if buf.size < self.seg_len else 1 + (buf.size - self.seg_len) // self.hop
        if n:
            segs = np.lib.stride_tricks.sliding_window_view(buf, self.seg_len)[::self.hop][:n]
            self._sum += np.sum(np.abs(np.fft.fft(segs * self._win, axis=-1)) ** 2, axis=0)
            self.segments += n
        self._buf = buf[n * self.hop:].copy()

    def estimate(self) -> PsdEstimate:
        if self.segments == 0:
            raise ValueError(f"stream is shorter than one segment ({self.seg_len})")
        f = np.fft.fftshift(np.fft.fftfreq(self.seg_len, 1.0 / self.cfg.sample_rate))
        p = np.fft.fftshift(self._sum * self._scale / self.segments)
        return PsdEstimate(f, p, _peak_reference(f, p, self.cfg), self.segments,
                           f"{self.window}/{self.seg_len}/{self.overlap}")


def _subcarrier_kernel(freqs: np.ndarray, cfg: SystemConfig) -> np.ndarray:
    """``(K, F)`` interference coefficients of each subcarrier at each frequency."""
    r = cfg.N_cp / cfg.N  # T_cp / T_s
    fm = cfg.k[:, None] - np.asarray(freqs)[None, :] * cfg.T_s
    return np.sinc(fm * (1.0 + r)) * np.exp(1j * np.pi * fm * (1.0 - r))


def analytical_psd_rect(
    freqs: np.ndarray, cfg: SystemConfig, n_draws: int = 0, rng: np.random.Generator | None = None,
    data: np.ndarray | None = None,
) -> PsdEstimate:
    """Rectangular-pulse OFDM PSD averaged over data.

    With ``n_draws == 0`` and no ``data`` the expectation is taken in closed
    form for independent unit-energy symbols (sum of squared kernels).
    """
    freqs = np.asarray(freqs, dtype=float)
    C = _subcarrier_kernel(freqs, cfg)
    scale = cfg.T_s + cfg.T_cp
    if data is None and n_draws > 0:
        from .config import random_symbols
        data = random_symbols(rng or np.random.default_rng(), n_draws, cfg)
    if data is None:
        psd = scale * np.sum(np.abs(C) ** 2, axis=0)
    else:
        psd = scale * np.mean(np.abs(np.asarray(data) @ C) ** 2, axis=0)
    return PsdEstimate(freqs, psd, _peak_reference(freqs, psd, cfg), 0, "analytic-rect")


def analytical_psd_smoothed(
    freqs: np.ndarray, cfg: SystemConfig, data: np.ndarray, smooth: np.ndarray,
    order: int | None = None,
) -> PsdEstimate:
    """Smoothed-signal PSD model from order-``V`` derivative spectra.

    ``data`` and ``smooth`` are ``(S, K)`` ensembles of ``X_i`` and the
    smooth-signal spectra ``W_i``. The density is

        (T_s + T_cp) / (T_s f)^(2V) * E|sum_m k_m^V (X + W)_m C_m(f)|^2

    and is referenced to the in-band peak of the rectangular-pulse model on
    the same data, since smoothing leaves the mean power unchanged. The
    ``f = 0`` bin is undefined for ``V > 0`` and returned as ``inf``.
    """
    data = np.asarray(data)
    smooth = np.asarray(smooth)
    if data.size == 0:
        raise ValueError("empty symbol ensemble")
    V = cfg.V if order is None else order
    freqs = np.asarray(freqs, dtype=float)
    C = _subcarrier_kernel(freqs, cfg)
    scale = cfg.T_s + cfg.T_cp
    kV = cfg.k.astype(float) ** V
    Z = (data + smooth) * kV[None, :]
    num = scale * np.mean(np.abs(Z @ C) ** 2, axis=0)
    with np.errstate(divide="ignore", invalid="ignore"):
        psd = num / np.abs(cfg.T_s * freqs) ** (2 * V)
    if V == 0:
        psd = num
    ref_model = scale * np.mean(np.abs(data @ C) ** 2, axis=0)
    return PsdEstimate(freqs, psd, _peak_reference(freqs, ref_model, cfg), 0, f"analytic-smoothed-V{V}")


def envelope(psd: PsdEstimate, f_lo: float, f_hi: float, bins_per_octave: int = 4) -> tuple[np.ndarray, np.ndarray]:
    """Maxima of the density in log-spaced bands between ``f_lo`` and ``f_hi``.

    Uses ``|f|``, folding both sides of the spectrum onto positive offsets.
    Returns the frequencies at which each band maximum occurs and the maxima.
    """
    f = np.abs(psd.freqs)
    sel = (f >= f_lo) & (f <= f_hi) & np.isfinite(psd.psd) & (psd.psd > 0)
    f, p = f[sel], psd.psd[sel]
    n_bands = max(1, int(np.ceil(np.log2(f_hi / f_lo) * bins_per_octave)))
    edges = f_lo * (f_hi / f_lo) ** (np.arange(n_bands + 1) / n_bands)
    fe, pe = [], []
    for a, b in zip(edges[:-1], edges[1:]):
        m = (f >= a) & (f < b) if b < edges[-1] else (f >= a) & (f <= b)
        if m.any():
            j = np.argmax(p[m])
            fe.append(f[m][j])
            pe.append(p[m][j])
    return np.asarray(fe), np.asarray(pe)


@dataclass
class DecayFit:
    exponent: float  # p in envelope ~ f^-p
    stderr: float
    points: int


def estimate_decay_exponent(psd: PsdEstimate, cfg: SystemConfig, f_lo: float, f_hi: float,
                            bins_per_octave: int = 4) -> DecayFit:
    """Least-squares slope of the log envelope against ``log10 |f|``."""
    edge = max(abs(cfg.k.min()) , abs(cfg.k.max())) * cfg.delta_f + 0.5 * cfg.delta_f
    if f_lo <= edge:
        raise ValueError(f"fit band starts at {f_lo} Hz, inside the occupied band (edge {edge} Hz)")
    if f_hi <= f_lo:
        raise ValueError("empty fit band")
    fe, pe = envelope(psd, f_lo, f_hi, bins_per_octave)
    if fe.size < 3:
        raise ValueError("too few envelope points for a slope fit")
    x, y = np.log10(fe), np.log10(pe)
    (slope, icpt), cov = np.polyfit(x, y, 1, cov=True)
    return DecayFit(float(-slope), float(np.sqrt(cov[0, 0])), int(fe.size))
