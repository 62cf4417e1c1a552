import numpy as np
import pytest

from ncofdm.config import build_system_config, lte_config, random_symbols
from ncofdm.experiments import decay_band
from ncofdm.fd_precoder import fd_precode_stream
from ncofdm.spectrum import (
    PsdEstimate,
    analytical_psd_rect,
    analytical_psd_smoothed,
    envelope,
    estimate_decay_exponent,
    in_band_mask,
    welch_psd,
)
from ncofdm.td_smoother import TDSmoother, smooth_spectrum
from ncofdm.tx import assemble_stream, idft_modulate

EDGE = 128.5 * 15e3


@pytest.fixture(scope="module")
def lte_streams():
    """Welch spectra of 3000 full-size symbols, plain and smoothed, same data."""
    cfg = lte_config(2)
    X = random_symbols(np.random.default_rng(99), 3000, cfg)
    out = {"X": X, "plain": welch_psd(idft_modulate(X, cfg).ravel(), cfg)}
    for V in (0, 2, 4):
        c = cfg.with_V(V)
        ybar, b = TDSmoother(c).process(X)
        out[V] = welch_psd(ybar.ravel(), c)
        out[f"b{V}"] = b
    out["fd2"] = welch_psd(idft_modulate(fd_precode_stream(X, cfg), cfg).ravel(), cfg)
    return out


def test_tone_calibration():
    cfg = build_system_config(1, 2048, 0, 0, subcarriers=[40])
    x = idft_modulate(np.ones((20, 1)), cfg).ravel()
    est = welch_psd(x, cfg)
    peak = est.freqs[np.argmax(est.psd)]
    assert peak == pytest.approx(40 * 15e3)
    assert est.psd_db.max() == pytest.approx(0.0)


def test_white_noise_flat(rng):
    cfg = build_system_config(256, 2048, 144, 0)
    x = rng.standard_normal(2048 + 520 * 1536) + 1j * rng.standard_normal(2048 + 520 * 1536)
    est = welch_psd(x, cfg)
    assert est.segment_count >= 500
    db = 10 * np.log10(est.psd / est.psd.mean())
    assert np.abs(db).max() < 1.0


def test_parseval(rng, small):
    X = random_symbols(rng, 600, small)
    stream = assemble_stream(idft_modulate(X, small))
    est = welch_psd(stream, small)
    total = np.sum(est.psd) * (est.freqs[1] - est.freqs[0])
    assert total == pytest.approx(stream.mean_power(), rel=0.01)


def test_peak_normalization_and_axis(lte_streams):
    est = lte_streams["plain"]
    assert np.all(np.diff(est.freqs) > 0)
    assert est.psd_db[in_band_mask(est.freqs, lte_config())].max() == pytest.approx(0.0)
    assert est.window == "hann/2048/512"


def test_too_short(tiny):
    with pytest.raises(ValueError):
        welch_psd(np.zeros(100, complex), tiny)


def test_synthetic_power_law():
    cfg = lte_config()
    f = np.linspace(-15e6, 15e6, 4001)
    with np.errstate(divide="ignore"):
        p = np.where(np.abs(f) > 1e5, np.abs(f) ** -4.0, 1.0)
    est = PsdEstimate(f, p, 1.0)
    fit = estimate_decay_exponent(est, cfg, 4e6, 12e6)
    assert fit.exponent == pytest.approx(4.0, abs=0.1)


def test_fit_band_must_be_out_of_band():
    cfg = lte_config()
    est = PsdEstimate(np.linspace(-1, 1, 11) * 1e7, np.ones(11), 1.0)
    with pytest.raises(ValueError):
        estimate_decay_exponent(est, cfg, 1e6, 5e6)
    with pytest.raises(ValueError):
        estimate_decay_exponent(est, cfg, 5e6, 4e6)


def test_envelope_is_upper_hull():
    f = np.linspace(1, 100, 500)
    p = 1 / f ** 2 * (1 + np.cos(f) ** 2)
    fe, pe = envelope(PsdEstimate(f, p, 1.0), 2, 64)
    assert fe.size >= 18
    assert np.all(np.diff(fe) > 0)


def test_plain_decay_exponent(lte_streams):
    fit = estimate_decay_exponent(lte_streams["plain"], lte_config(), *decay_band(lte_config()))
    assert fit.exponent == pytest.approx(2.0, abs=0.3)


def test_rect_model_single_carrier_nulls():
    cfg = build_system_config(1, 2048, 144, 0, subcarriers=[0])
    r = 144 / 2048
    nulls = np.array([1, 2, 3]) / (1 + r) / cfg.T_s
    est = analytical_psd_rect(np.concatenate([[0.0], nulls]), cfg)
    assert np.all(est.psd[1:] / est.psd[0] < 1e-25)


def test_rect_model_monte_carlo_matches_closed_form(rng, small):
    f = np.linspace(-3e6, 3e6, 301)
    exact = analytical_psd_rect(f, small)
    mc = analytical_psd_rect(f, small, n_draws=4000, rng=rng)
    assert np.abs(mc.psd_db - exact.psd_db).max() < 0.6


def test_rect_model_matches_welch(lte_streams):
    est = lte_streams["plain"]
    model = analytical_psd_rect(est.freqs, lte_config())
    # start past the Hann main-lobe half width (two bins), which smears the band edge
    sel = (np.abs(est.freqs) >= EDGE + 30e3) & (np.abs(est.freqs) <= EDGE + 1e6)
    assert np.abs(est.psd_db[sel] - model.psd_db[sel]).max() < 2.0


def test_smoothed_model_reduces_to_rect(rng, small):
    c = small.with_V(0)
    f = np.linspace(-3e6, 3e6, 101)
    X = random_symbols(rng, 50, c)
    a = analytical_psd_smoothed(f, c, X, np.zeros_like(X))
    b = analytical_psd_rect(f, c, data=X)
    assert np.allclose(a.psd, b.psd)
    with pytest.raises(ValueError):
        analytical_psd_smoothed(f, c, X[:0], X[:0])


@pytest.mark.parametrize("V", [0, 2, 4])
def test_smoothed_model_far_band_slope(lte_streams, V):
    cfg = lte_config(V)
    f = lte_streams[V].freqs
    X, b = lte_streams["X"][1:201], lte_streams[f"b{V}"][1:201]
    model = analytical_psd_smoothed(f, cfg, X, smooth_spectrum(b, cfg))
    fit = estimate_decay_exponent(model, cfg, *decay_band(cfg))
    assert fit.exponent >= 2 * V + 2 - 0.2


def _fall_off_region(est, depth=30.0):
    f = est.freqs
    pos = f > EDGE
    below = np.flatnonzero(pos & (est.psd_db < -depth))
    return pos & (f < f[below[0]])


def test_smoothed_model_bounds_measurement(lte_streams):
    cfg = lte_config(2)
    est = lte_streams[2]
    X, b = lte_streams["X"][1:401], lte_streams["b2"][1:401]
    model = analytical_psd_smoothed(est.freqs, cfg, X, smooth_spectrum(b, cfg))
    sel = (est.freqs > 2 * EDGE) & (est.freqs < cfg.sample_rate / 4)
    assert np.all(model.psd_db[sel] >= est.psd_db[sel] - 1.0)


@pytest.mark.xfail(strict=True, reason="the smoothed-signal model is an upper bound, 3 to 7 dB loose near the band edge")
def test_smoothed_model_within_3db_of_welch(lte_streams):
    cfg = lte_config(2)
    est = lte_streams[2]
    X, b = lte_streams["X"][1:401], lte_streams["b2"][1:401]
    model = analytical_psd_smoothed(est.freqs, cfg, X, smooth_spectrum(b, cfg))
    sel = _fall_off_region(est)
    assert np.abs(model.psd_db[sel] - est.psd_db[sel]).max() <= 3.0


def test_monotone_suppression(lte_streams):
    cfg = lte_config()
    lo, hi = decay_band(cfg)
    envs = [envelope(lte_streams[k], lo, hi)[1] for k in ("plain", 0, 2, 4)]
    for a, b in zip(envs[:-1], envs[1:]):
        assert np.all(b <= a)


def test_fd_and_td_spectra_agree(lte_streams):
    lo, hi = EDGE, lte_config().sample_rate / 2
    _, a = envelope(lte_streams[2], lo, hi)
    _, b = envelope(lte_streams["fd2"], lo, hi)
    assert np.abs(10 * np.log10(a / b)).max() < 0.5


def test_at_window(lte_streams):
    est = lte_streams["plain"]
    assert est.at(4e6, 60e3) == pytest.approx(est.at(4e6, 60e3))
    with pytest.raises(ValueError):
        est.at(4e6, 1.0)


def test_streaming_accumulator_matches_welch(rng, lte):
    from ncofdm.spectrum import WelchAccumulator

    x = rng.standard_normal(40_000) + 1j * rng.standard_normal(40_000)
    ref = welch_psd(x, lte)
    acc = WelchAccumulator(lte)
    for part in np.array_split(x, 9):
        acc.feed(part)
    got = acc.estimate()
    assert got.segment_count == ref.segment_count
    assert np.allclose(got.psd, ref.psd, rtol=1e-12)
    with pytest.raises(ValueError):
        WelchAccumulator(lte).estimate()
    with pytest.raises(ValueError):
        WelchAccumulator(lte, overlap=2048)
