import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ncofdm.config import build_system_config, lte_config, random_symbols
from ncofdm.fd_precoder import (
    ConditioningError,
    FDPrecoder,
    build_A,
    build_P,
    fd_precode_step,
    fd_precode_stream,
    projection_defects,
)

# frozen: first row of P at K=8, N=32, N_cp=4, V=1; P[0,0] = 140/336 by hand
P_TINY_ROW0 = np.array([
    4.1666666666666669e-01 - 2.1172651506510018e-34j,
    2.3570226039551584e-01 - 2.3570226039551581e-01j,
    1.5308084989341912e-17 - 2.4999999999999997e-01j,
])


def test_frozen_entries(tiny):
    P = build_P(tiny).P
    assert np.allclose(P[0, :3], P_TINY_ROW0, atol=1e-15)
    assert P[0, 0].real == pytest.approx(140 / 336, abs=1e-15)


def test_scaled_rows_bounded(lte):
    A, scale = build_A(lte.with_V(4))
    assert np.abs(A).max() <= 1.0 + 1e-15
    assert scale[1] == pytest.approx(2 / 256)


@pytest.mark.parametrize("V", [0, 1, 2, 3, 4])
def test_projection_properties(V):
    cfg = lte_config(V)
    d = projection_defects(build_P(cfg))
    assert d["idempotence"] < 1e-12
    assert d["hermitian"] < 1e-12
    assert abs(d["trace"] - (V + 1)) < 1e-10


def test_unscaled_construction_refused_when_ill_conditioned():
    with pytest.raises(ConditioningError) as exc:
        build_P(lte_config(4), scaled=False)
    assert exc.value.cond > 1e14
    build_P(lte_config(4))  # scaled succeeds


def test_projection_independent_of_row_scaling(small):
    a = build_P(small).P
    b = build_P(small, row_scale=np.array([3.0, 0.1, 7.0])).P
    assert np.allclose(a, b, atol=1e-12)


def test_continuity_constraint(small, rng):
    mats = build_P(small)
    X = random_symbols(rng, 20, small)
    Xb = fd_precode_stream(X, small, mats)
    lhs = (mats.A * mats.Phi[None, :]) @ Xb[1:].T
    rhs = mats.A @ Xb[:-1].T
    assert np.allclose(lhs, rhs, atol=1e-12)


def test_correction_lies_in_projection_range(small, rng):
    mats = build_P(small)
    X = random_symbols(rng, 10, small)
    D = (fd_precode_stream(X, small, mats) - X).T
    assert np.allclose(mats.P @ D, D, atol=1e-12)


def test_first_symbol_unchanged(tiny, rng):
    X = random_symbols(rng, 3, tiny)
    assert np.array_equal(fd_precode_stream(X, tiny)[0], X[0])


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 9))
def test_chunked_matches_stepwise(seed, split):
    cfg = build_system_config(8, 32, 4, 1)
    mats = build_P(cfg)
    X = random_symbols(np.random.default_rng(seed), 10, cfg)
    prev, ref = None, []
    for x in X:
        prev = fd_precode_step(x, prev, mats)
        ref.append(prev)
    p = FDPrecoder(cfg, mats)
    got = np.vstack([p.process(X[:split]), p.process(X[split:])])
    assert np.allclose(got, np.array(ref), atol=1e-13)


def test_shape_errors(tiny):
    mats = build_P(tiny)
    with pytest.raises(ValueError):
        fd_precode_step(np.ones(7), None, mats)
    with pytest.raises(ValueError):
        fd_precode_step(np.ones(8), np.ones(9), mats)
    with pytest.raises(ValueError):
        FDPrecoder(tiny, mats).process(np.ones((2, 9)))
