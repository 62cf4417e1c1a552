"""Study drivers shared by the command line and the acceptance checks.

Each ``run_*`` function is deterministic for a given seed and returns plain
records (dicts, dataclasses, arrays) that the CLI serializes. Random streams
for data, channel and noise are derived from one root seed with
:class:`numpy.random.SeedSequence`, so changing one study parameter does not
reshuffle the draws of an unrelated stream.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import channel as chan
from .complexity import complexity_rows, table_discrepancies
from .config import SystemConfig, build_system_config, qam_demap, qam_map, random_symbols
from .fd_precoder import FDPrecoder, build_P, projection_defects
from .spectrum import (
    PsdEstimate,
    WelchAccumulator,
    analytical_psd_rect,
    analytical_psd_smoothed,
    estimate_decay_exponent,
)
from .td_smoother import (
    StreamTrace,
    TDSmoother,
    build_smoother_matrices,
    continuity_residuals,
    junction_scale,
    smooth_spectrum,
)
from .tx import body, idft_modulate

REFERENCE_SAMPLE_RATE = 30.72e6
REFERENCE_OFFSET_HZ = 4e6  # out-of-band comparison point at the reference sample rate


def _streams(seed: int, n: int) -> list[np.random.Generator]:
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(n)]


def _chunks(total: int, size: int):
    for start in range(0, total, size):
        yield start, min(size, total - start)


def comparison_offset(cfg: SystemConfig) -> float:
    """The 4 MHz comparison point scaled to this configuration's sample rate."""
    return REFERENCE_OFFSET_HZ * cfg.sample_rate / REFERENCE_SAMPLE_RATE


def decay_band(cfg: SystemConfig) -> tuple[float, float]:
    """Far-band fit window: twice the band edge up to a quarter of the sample rate.

    At low oversampling the upper limit is pushed out to one octave (at most
    0.45 fs). Raises ``ValueError`` when no out-of-band room is left.
    """
    edge = (max(abs(int(cfg.k.min())), abs(int(cfg.k.max()))) + 0.5) * cfg.delta_f
    f_lo, f_hi = 2.0 * edge, cfg.sample_rate / 4.0
    if f_hi < 1.5 * f_lo:
        f_hi = min(2.0 * f_lo, 0.45 * cfg.sample_rate)
    if f_hi <= f_lo:
        raise ValueError(f"no out-of-band room for a decay fit (band edge {edge} Hz, fs {cfg.sample_rate} Hz)")
    return f_lo, f_hi


# ---------------------------------------------------------------------------
# equivalence and continuity


def run_equivalence(cfg: SystemConfig, n_symbols: int, seed: int) -> dict:
    """Samplewise FD-vs-TD deviation on a common random sequence."""
    rng = _streams(seed, 1)[0]
    t0 = time.perf_counter()
    X = random_symbols(rng, n_symbols, cfg)
    fd = idft_modulate(FDPrecoder(cfg).process(X), cfg)
    td, _ = TDSmoother(cfg).process(X)
    diff = np.abs(fd - td).max()
    return {
        "K": cfg.K, "N": cfg.N, "N_cp": cfg.N_cp, "V": cfg.V, "symbols": n_symbols,
        "max_abs_dev": float(diff),
        "max_rel_dev": float(diff / np.abs(fd).max()),
        "seconds": time.perf_counter() - t0,
    }


@dataclass
class ContinuityResult:
    V: int
    relative: np.ndarray  # (S-1, V+1) |residual| / per-order RMS derivative
    absolute: np.ndarray

    @property
    def worst(self) -> np.ndarray:
        return self.relative.max(axis=0)


def run_continuity(cfg: SystemConfig, n_symbols: int, seed: int) -> ContinuityResult:
    """Junction residuals for orders ``0..V`` on a smoothed stream.

    Residuals are reported relative to the RMS magnitude of the derivative
    of that order meeting at the junctions.
    """
    if n_symbols < 2:
        raise ValueError("continuity needs at least two symbols")
    rng = _streams(seed, 1)[0]
    X = random_symbols(rng, n_symbols, cfg)
    b = TDSmoother(cfg).coordinates(X)
    trace = StreamTrace(cfg, X, b)
    res = np.abs(continuity_residuals(trace))
    scale = np.sqrt(np.mean(junction_scale(trace) ** 2, axis=0))
    return ContinuityResult(cfg.V, res / scale[None, :], res)


# ---------------------------------------------------------------------------
# smooth-signal power


def run_power(cfg: SystemConfig, n_symbols: int, seed: int, chunk: int = 4096) -> dict:
    """Mean body energies of the data and smooth components.

    Energies are sums over the ``N`` body samples; the smooth-signal energy
    uses the Gram matrix of the basis restricted to the body.
    """
    rng = _streams(seed, 1)[0]
    mats = build_smoother_matrices(cfg)
    sm = TDSmoother(cfg, mats)
    Qb = mats.Qf[cfg.N_cp:]
    G = Qb.conj().T @ Qb
    w_sum = y_sum = 0.0
    count = 0
    for i, (_, n) in enumerate(_chunks(n_symbols, chunk)):
        X = random_symbols(rng, n, cfg)
        b = sm.coordinates(X)
        if i == 0:
            b, X = b[1:], X[1:]  # the first symbol is sent unsmoothed
        w_sum += float(np.real(np.einsum("si,ij,sj->", b.conj(), G, b)))
        y_sum += float(np.sum(np.abs(X) ** 2)) / cfg.N
        count += b.shape[0]
    w_mean, y_mean = w_sum / count, y_sum / count
    return {
        "V": cfg.V, "symbols": count,
        "w_energy": w_mean, "w_expected": 2.0 * (cfg.V + 1) / cfg.N,
        "y_energy": y_mean, "y_expected": cfg.K / cfg.N,
        "power_ratio": y_mean / w_mean, "ratio_expected": cfg.K / (2.0 * (cfg.V + 1)),
    }


def run_projection(cfg: SystemConfig) -> dict:
    mats = build_P(cfg)
    d = projection_defects(mats)
    return {"K": cfg.K, "N": cfg.N, "V": cfg.V, "cond": mats.cond, **d}


# ---------------------------------------------------------------------------
# spectra


@dataclass
class PsdStudy:
    cfg: SystemConfig
    measured: dict[str, PsdEstimate]
    analytic: dict[str, PsdEstimate]
    decay: dict[str, dict]
    gaps: dict[str, float]  # dB below plain at the comparison offset
    offset_hz: float
    meta: dict = field(default_factory=dict)


def _fit_row(est: PsdEstimate, cfg: SystemConfig, V: int | None) -> dict:
    bound = 2.0 if V is None else 2.0 * V + 2.0
    try:
        f_lo, f_hi = decay_band(cfg)
        fit = estimate_decay_exponent(est, cfg, f_lo, f_hi)
    except ValueError:
        nan = float("nan")
        return {"exponent": nan, "stderr": nan, "points": 0, "bound": bound,
                "f_lo": nan, "f_hi": nan, "near_stronger_bound": False}
    row = {"exponent": fit.exponent, "stderr": fit.stderr, "points": fit.points,
           "bound": bound, "f_lo": f_lo, "f_hi": f_hi}
    # a slope near 2V+4 or beyond is worth a note, never a failure
    row["near_stronger_bound"] = bool(V is not None and fit.exponent >= 2.0 * V + 4.0 - 0.5)
    return row


def run_psd(cfg: SystemConfig, V_set, n_symbols: int, seed: int, include_fd: bool = True,
            analytic_draws: int = 400, halfwidth_bins: int = 4, chunk: int = 1000) -> PsdStudy:
    """Welch and model spectra of plain, TD-smoothed and FD-precoded streams.

    All streams carry the same data. Each stream is synthesized and
    analysed chunk by chunk, so memory does not grow with the budget.
    """
    if n_symbols <= 0:
        raise ValueError("symbol budget must be positive")
    data_seed = np.random.SeedSequence(seed).spawn(1)[0]
    n_model = min(analytic_draws, n_symbols - 1)

    def data_chunks():
        rng = np.random.default_rng(data_seed)
        for _, n in _chunks(n_symbols, chunk):
            yield random_symbols(rng, n, cfg)

    def welch_of(synth, c):
        acc = WelchAccumulator(c)
        for X in data_chunks():
            acc.feed(synth(X))
        return acc.estimate()

    measured: dict[str, PsdEstimate] = {}
    analytic: dict[str, PsdEstimate] = {}
    decay: dict[str, dict] = {}

    measured["plain"] = welch_of(lambda X: idft_modulate(X, cfg), cfg)
    freqs = measured["plain"].freqs
    analytic["plain"] = analytical_psd_rect(freqs, cfg)
    decay["plain"] = _fit_row(measured["plain"], cfg, None)

    for V in V_set:
        c = cfg.with_V(V)
        td = TDSmoother(c)
        ensemble: list[tuple[np.ndarray, np.ndarray]] = []
        kept = 0

        def smooth(X):
            nonlocal kept
            ybar, b = td.process(X)
            if kept < n_model + 1:
                take = min(n_model + 1 - kept, X.shape[0])
                ensemble.append((X[:take], b[:take]))
                kept += take
            return ybar

        label = f"td_V{V}"
        measured[label] = welch_of(smooth, c)
        decay[label] = _fit_row(measured[label], c, V)
        if n_model > 0:
            Xe = np.concatenate([e[0] for e in ensemble])[1:]  # symbol 0 is unsmoothed
            be = np.concatenate([e[1] for e in ensemble])[1:]
            analytic[label] = analytical_psd_smoothed(freqs, c, Xe, smooth_spectrum(be, c))
        if include_fd:
            fd = FDPrecoder(c)
            measured[f"fd_V{V}"] = welch_of(lambda X: idft_modulate(fd.process(X), c), c)
            decay[f"fd_V{V}"] = _fit_row(measured[f"fd_V{V}"], c, V)

    f0 = comparison_offset(cfg)
    hw = halfwidth_bins * (freqs[1] - freqs[0])
    plain_at = measured["plain"].at(f0, hw)
    gaps = {label: plain_at - est.at(f0, hw) for label, est in measured.items() if label != "plain"}
    meta = {"symbols": n_symbols, "segments": measured["plain"].segment_count,
            "window": measured["plain"].window, "levels_db": {k: e.at(f0, hw) for k, e in measured.items()}}
    return PsdStudy(cfg, measured, analytic, decay, gaps, f0, meta)


# ---------------------------------------------------------------------------
# link-level studies


def _fading_channel(cfg: SystemConfig, n_symbols: int, f_d: float, rng: np.random.Generator):
    return chan.generate_eva_taps(cfg, f_d=f_d, duration=n_symbols * cfg.frame_len,
                                  seed=int(rng.integers(0, 2 ** 63 - 1)))


class _ChannelPipe:
    """Streams consecutive chunks of one waveform through a shared channel."""

    def __init__(self, ch):
        self.ch = ch
        self.history: np.ndarray | None = None

    def __call__(self, frames: np.ndarray, start: int) -> np.ndarray:
        x = frames.ravel()
        out = chan.apply_multipath(x, self.ch, start=start, history=self.history)
        self.history = x[-max(self.ch.max_delay, 1):]
        return out.reshape(frames.shape)


@dataclass
class BerStudy:
    cfg: SystemConfig
    ebno_db: list[float]
    errors: dict[str, list[int]]
    trials: dict[str, list[int]]
    fd_td_bit_mismatch: dict[int, int]  # V -> differing decided bits over the whole run
    channel: str
    meta: dict = field(default_factory=dict)

    def ber(self, label: str) -> np.ndarray:
        return np.asarray(self.errors[label]) / np.asarray(self.trials[label])

    def rows(self) -> list[dict]:
        out = []
        for label in self.errors:
            for j, e in enumerate(self.ebno_db):
                n, k = self.trials[label][j], self.errors[label][j]
                lo, hi = chan.binomial_interval(k, n)
                out.append({"scheme": label, "ebno_db": e, "ber": k / n, "trials": n,
                            "errors": k, "ci_low": lo, "ci_high": hi})
        return out

    def ordering_violations(self, order: list[str]) -> list[dict]:
        """Adjacent pairs where the lower-order scheme is significantly worse."""
        bad = []
        for a, b in zip(order[:-1], order[1:]):
            for j, e in enumerate(self.ebno_db):
                if chan.exceeds_significantly(self.errors[a][j], self.trials[a][j],
                                              self.errors[b][j], self.trials[b][j]):
                    bad.append({"ebno_db": e, "better_expected": a, "worse_expected": b})
        return bad


def run_ber(cfg: SystemConfig, V_set, ebno_db, n_symbols: int, seed: int, f_d: float = 222.0,
            fading: bool = True, include_fd: bool = True, chunk: int = 500) -> BerStudy:
    """BER of plain and smoothed streams over common data, channel and noise.

    The first symbol of each stream is excluded from the counts, since it is
    transmitted unsmoothed.
    """
    if n_symbols < 2:
        raise ValueError("BER needs at least two symbols")
    rng_data, rng_ch, rng_noise = _streams(seed, 3)
    ch = _fading_channel(cfg, n_symbols, f_d, rng_ch) if fading else None
    noise_rngs = [np.random.default_rng(s) for s in np.random.SeedSequence(int(rng_noise.integers(2 ** 63))).spawn(len(ebno_db))]

    labels = ["plain"] + [f"td_V{V}" for V in V_set]
    smoothers = {V: TDSmoother(cfg.with_V(V)) for V in V_set}
    fds = {V: FDPrecoder(cfg.with_V(V)) for V in V_set} if include_fd else {}
    if include_fd:
        labels += [f"fd_V{V}" for V in V_set]
    pipes = {lab: _ChannelPipe(ch) for lab in labels} if ch is not None else {}
    errors = {lab: [0] * len(ebno_db) for lab in labels}
    trials = {lab: [0] * len(ebno_db) for lab in labels}
    mismatch = {V: 0 for V in fds}
    F = cfg.frame_len

    for start, n in _chunks(n_symbols, chunk):
        bits = np.random.default_rng(rng_data.integers(2 ** 63)).integers(
            0, 2, size=(n, cfg.K * cfg.bits_per_symbol), dtype=np.uint8)
        X = qam_map(bits, cfg)
        tx = {"plain": idft_modulate(X, cfg)}
        for V in V_set:
            tx[f"td_V{V}"] = smoothers[V].process(X)[0]
            if include_fd:
                tx[f"fd_V{V}"] = idft_modulate(fds[V].process(X), cfg)
        if ch is not None:
            tx = {lab: pipes[lab](w, start * F) for lab, w in tx.items()}
            H = chan.frequency_response(ch, cfg, start * F, n)
        else:
            H = None
        keep = slice(1, None) if start == 0 else slice(None)
        for j, e in enumerate(ebno_db):
            var = chan.noise_variance(e, cfg)
            noise = None
            if var > 0:
                z = noise_rngs[j].standard_normal((2, n, F))
                noise = math.sqrt(var / 2.0) * (z[0] + 1j * z[1])
            decided = {}
            for lab, w in tx.items():
                rx = w if noise is None else w + noise
                R = np.fft.fft(body(rx, cfg), axis=-1)[:, cfg.bins()]
                if H is not None:
                    R = R / H
                d = qam_demap(R[keep], cfg)
                decided[lab] = d
                errors[lab][j] += int(np.count_nonzero(d != bits[keep]))
                trials[lab][j] += d.size
            for V in fds:
                mismatch[V] += int(np.count_nonzero(decided[f"fd_V{V}"] != decided[f"td_V{V}"]))

    meta = {"f_d": f_d if fading else None, "symbols": n_symbols,
            "channel_seed": None if ch is None else ch.seed}
    return BerStudy(cfg, list(ebno_db), errors, trials, mismatch, "EVA" if fading else "AWGN", meta)


@dataclass
class SinrStudy:
    cfg: SystemConfig
    records: list[chan.SinrRecord]
    channel_gain: float
    meta: dict = field(default_factory=dict)

    def rows(self) -> list[dict]:
        return [{"ebno_db": r.ebno_db, "sinr_meas_db": r.measured_sinr_db,
                 "sinr_theory_db": r.closed_form_sinr_db, "V": r.V} for r in self.records]


def run_sinr(cfg: SystemConfig, V_set, ebno_db, n_symbols: int, seed: int, f_d: float = 222.0,
             chunk: int = 500) -> SinrStudy:
    """Measured SINR from separately propagated data and smooth components.

    Component energies are the in-band energies of each symbol body after
    the channel; the closed form uses the realized mean channel power.
    """
    if n_symbols < 2:
        raise ValueError("SINR needs at least two symbols")
    rng_data, rng_ch, rng_noise = _streams(seed, 3)
    ch = _fading_channel(cfg, n_symbols, f_d, rng_ch)
    F = cfg.frame_len
    smoothers = {V: TDSmoother(cfg.with_V(V)) for V in V_set}
    mats = {V: s.mats for V, s in smoothers.items()}
    y_pipe = _ChannelPipe(ch)
    w_pipes = {V: _ChannelPipe(ch) for V in V_set}
    y_energy = 0.0
    w_energy = {V: 0.0 for V in V_set}
    count = 0
    for start, n in _chunks(n_symbols, chunk):
        X = random_symbols(rng_data, n, cfg)
        keep = slice(1, None) if start == 0 else slice(None)
        y = y_pipe(idft_modulate(X, cfg), start * F)
        y_energy += float(chan.inband_energy(y[keep], cfg).sum())
        for V in V_set:
            b = smoothers[V].coordinates(X)
            w = w_pipes[V](b @ mats[V].Qf.T, start * F)
            w_energy[V] += float(chan.inband_energy(w[keep], cfg).sum())
        count += y[keep].shape[0]
    gain = ch.mean_power(0, n_symbols * F)
    sig = y_energy / count

    noise_rngs = [np.random.default_rng(s) for s in np.random.SeedSequence(int(rng_noise.integers(2 ** 63))).spawn(len(ebno_db))]
    records = []
    for j, e in enumerate(ebno_db):
        var = chan.noise_variance(e, cfg)
        if var > 0:
            acc = 0.0
            for _, n in _chunks(count, chunk):
                z = noise_rngs[j].standard_normal((2, n, cfg.N))
                Z = np.fft.fft(z[0] + 1j * z[1], axis=-1)[:, cfg.bins()]
                acc += 0.5 * var * float(np.sum(np.abs(Z) ** 2)) / cfg.N
            noise = acc / count
        else:
            noise = 0.0
        for V in V_set:
            meas = chan.measure_sinr(sig, w_energy[V] / count, noise)
            theory = chan.closed_form_sinr(cfg, gain, chan.symbol_noise_energy(e, cfg), V)
            records.append(chan.SinrRecord(float(e), meas, theory, V))
    meta = {"symbols": n_symbols, "f_d": f_d, "channel_seed": ch.seed,
            "signal_energy": sig, "smooth_energy": {V: w_energy[V] / count for V in V_set}}
    return SinrStudy(cfg, records, gain, meta)


# ---------------------------------------------------------------------------
# complexity


def run_complexity(K: int, N: int, V_set, benchmark_symbols: int = 0, seed: int = 0) -> dict:
    """Closed-form counts, table discrepancies and an optional timing run.

    The timing run is machine dependent and only informative.
    """
    out = {"rows": complexity_rows(K, N, V_set), "discrepancies": table_discrepancies(K, N)}
    if benchmark_symbols > 0:
        rng = _streams(seed, 1)[0]
        timing = []
        for V in V_set:
            cfg = build_system_config(K, N, max(N // 16, 1) if N >= 16 else 0, V)
            X = random_symbols(rng, benchmark_symbols, cfg)
            fd, td = FDPrecoder(cfg), TDSmoother(cfg)
            t0 = time.perf_counter()
            fd.process(X)
            t1 = time.perf_counter()
            b = td.coordinates(X)
            _ = b @ td.mats.Qf.T
            t2 = time.perf_counter()
            timing.append({"V": V, "fd_seconds": t1 - t0, "td_seconds": t2 - t1})
        out["timing"] = timing
    return out
