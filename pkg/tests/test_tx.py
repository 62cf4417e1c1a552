import numpy as np
import pytest

from ncofdm.config import build_system_config, random_symbols
from ncofdm.tx import (
    SampleStream,
    assemble_stream,
    body,
    dft_demodulate,
    evaluate_at,
    idft_modulate,
    read_iq,
    write_iq,
)


def test_direct_sum_oracle(tiny, rng):
    X = random_symbols(rng, 3, tiny)
    y = idft_modulate(X, tiny)
    n = np.arange(-tiny.N_cp, tiny.N)
    ref = np.exp(2j * np.pi * np.outer(n, tiny.k) / tiny.N) @ X.T / tiny.N
    assert np.allclose(y, ref.T, atol=1e-15)
    assert np.allclose(evaluate_at(X, n, tiny), y, atol=1e-15)


def test_cyclic_prefix_copies_tail(small, rng):
    y = idft_modulate(random_symbols(rng, 2, small), small)
    assert np.array_equal(y[:, : small.N_cp], y[:, -small.N_cp :])


def test_single_subcarrier_tone():
    cfg = build_system_config(1, 16, 0, 0, subcarriers=[3])
    y = idft_modulate(np.array([1.0 + 0j]), cfg)
    assert np.allclose(y, np.exp(2j * np.pi * 3 * np.arange(16) / 16) / 16)


def test_demodulate_inverts(small, rng):
    X = random_symbols(rng, 4, small)
    assert np.allclose(dft_demodulate(idft_modulate(X, small), small), X, atol=1e-13)


def test_body_energy_is_K_over_N(small, rng):
    X = random_symbols(rng, 2000, small)
    e = np.sum(np.abs(body(idft_modulate(X, small), small)) ** 2, axis=1)
    assert e.mean() == pytest.approx(small.K / small.N, rel=0.02)


def test_wrong_width_rejected(tiny):
    with pytest.raises(ValueError):
        idft_modulate(np.ones(7), tiny)


def test_stream_assembly(tiny, rng):
    frames = idft_modulate(random_symbols(rng, 3, tiny), tiny)
    s = assemble_stream(frames)
    assert isinstance(s, SampleStream)
    assert s.symbol_count == 3
    assert np.array_equal(s.frames(), frames)
    assert s.junctions().tolist() == [36, 72]
    with pytest.raises(ValueError):
        assemble_stream([frames[0], frames[1][:-1]])


def test_iq_roundtrip(tmp_path, rng):
    x = rng.standard_normal(50) + 1j * rng.standard_normal(50)
    p = tmp_path / "x.iq"
    write_iq(p, x)
    assert p.stat().st_size == 50 * 16
    assert np.array_equal(read_iq(p), x)
