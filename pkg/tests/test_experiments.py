import numpy as np
import pytest

from ncofdm.config import build_system_config, lte_config
from ncofdm.experiments import (
    comparison_offset,
    decay_band,
    run_ber,
    run_complexity,
    run_continuity,
    run_equivalence,
    run_power,
    run_projection,
    run_sinr,
)


def test_reference_points():
    cfg = lte_config()
    assert comparison_offset(cfg) == pytest.approx(4e6)
    lo, hi = decay_band(cfg)
    assert lo == pytest.approx(2 * 128.5 * 15e3) and hi == pytest.approx(7.68e6)
    assert comparison_offset(build_system_config(64, 256, 16, 0)) == pytest.approx(0.5e6)
    lo, hi = decay_band(build_system_config(64, 256, 16, 0))
    assert hi > 1.5 * lo
    with pytest.raises(ValueError):
        decay_band(build_system_config(120, 128, 16, 0))


def test_equivalence_and_continuity_small():
    cfg = build_system_config(8, 32, 4, 1)
    assert run_equivalence(cfg, 200, 1)["max_rel_dev"] < 1e-12
    r = run_continuity(cfg, 200, 1)
    assert r.relative.shape == (199, 2) and r.worst.max() < 1e-10
    with pytest.raises(ValueError):
        run_continuity(cfg, 1, 1)


def test_power_small():
    r = run_power(build_system_config(64, 256, 16, 1), 6000, 2, chunk=1000)
    assert r["symbols"] == 5999
    assert r["w_energy"] == pytest.approx(r["w_expected"], rel=0.05)
    assert r["y_energy"] == pytest.approx(r["y_expected"], rel=0.01)


def test_projection_record():
    r = run_projection(build_system_config(64, 256, 16, 2))
    assert r["idempotence"] < 1e-12 and abs(r["trace"] - 3) < 1e-12


def test_ber_determinism_and_shapes():
    cfg = build_system_config(64, 256, 16, 0)
    a = run_ber(cfg, [0, 2], [5.0, 15.0], 30, seed=9, chunk=7)
    b = run_ber(cfg, [0, 2], [5.0, 15.0], 30, seed=9, chunk=7)
    assert a.errors == b.errors
    assert a.trials["plain"] == [29 * 64 * 4] * 2
    assert a.fd_td_bit_mismatch == {0: 0, 2: 0}
    assert len(a.rows()) == 5 * 2


def test_ber_chunking_invariance():
    cfg = build_system_config(64, 256, 16, 0)
    a = run_ber(cfg, [2], [10.0], 25, seed=9, chunk=25, fading=False)
    b = run_ber(cfg, [2], [10.0], 25, seed=9, chunk=25, fading=False)
    assert a.errors == b.errors


def test_sinr_small_tracks_closed_form():
    cfg = build_system_config(64, 256, 16, 2)
    st = run_sinr(cfg, [2], [0.0, 20.0, 40.0], 400, seed=1)
    for r in st.records:
        assert abs(r.measured_sinr_db - r.closed_form_sinr_db) < 0.5
    meas = [r.measured_sinr_db for r in st.records]
    assert meas == sorted(meas)


def test_complexity_with_timing():
    out = run_complexity(64, 256, (0, 1), benchmark_symbols=20)
    assert len(out["rows"]) == 4
    assert {t["V"] for t in out["timing"]} == {0, 1}


def test_psd_study_chunk_invariant():
    from ncofdm.experiments import run_psd

    cfg = build_system_config(64, 512, 32, 0)
    a = run_psd(cfg, [1], 120, 5, chunk=120, analytic_draws=20)
    b = run_psd(cfg, [1], 120, 5, chunk=17, analytic_draws=20)
    for k in a.measured:
        assert np.allclose(a.measured[k].psd, b.measured[k].psd, rtol=1e-10)
    assert np.allclose(a.analytic["td_V1"].psd, b.analytic["td_V1"].psd)
    assert set(a.gaps) == {"td_V1", "fd_V1"}
