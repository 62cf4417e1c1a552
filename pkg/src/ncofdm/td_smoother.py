"""Time-domain N-continuous smoothing.

Every symbol after the first receives an additive smooth signal

    w_i(n) = sum_{v=0}^{V} b_{i,v} f^(v)(n)

built from the basis functions

    f^(v)(n) = (1/N) sum_k (j 2 pi k / N)^v exp(-j phi k) exp(j 2 pi k n / N).

The coordinates ``b_i`` solve ``Pf b_i = dy_i`` where ``dy_i`` stacks the
junction mismatches of the signal and its first ``V`` derivatives. Only
``V + 1`` edge values of the previous symbol are carried between symbols.

Derivatives are taken with respect to the sample index ``n``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from .config import SystemConfig
from .fd_precoder import ConditioningError
from .tx import SampleStream, assemble_stream, evaluate_at, idft_modulate


def _orders_weights(cfg: SystemConfig, orders: int) -> np.ndarray:
    """``(orders+1, K)`` matrix of ``(j 2 pi k / N) ** v``."""
    jw = 2j * np.pi * cfg.k / cfg.N
    return jw[None, :] ** np.arange(orders + 1)[:, None]


def _phase_matrix(cfg: SystemConfig, n: np.ndarray) -> np.ndarray:
    """``(K, len(n))`` matrix of ``exp(j 2 pi k n / N)`` with exact index reduction."""
    kn = np.mod(np.multiply.outer(cfg.k, np.asarray(n)), cfg.N)
    return np.exp(2j * np.pi * kn / cfg.N)


@dataclass(frozen=True)
class BasisSet:
    """``2V+1`` basis vectors over ``n = -N_cp .. N-1`` plus edge values."""

    vectors: np.ndarray  # (2V+1, N_cp+N)
    edge_start: np.ndarray  # f^(v)(-N_cp)
    edge_end: np.ndarray  # f^(v)(N)

    @property
    def max_order(self) -> int:
        return self.vectors.shape[0] - 1


def basis_values(cfg: SystemConfig, n: np.ndarray, max_order: int) -> np.ndarray:
    """``f^(v)(n)`` for ``v = 0..max_order``; shape ``(max_order+1, len(n))``."""
    coeff = _orders_weights(cfg, max_order) * np.exp(-1j * cfg.phi * cfg.k)[None, :]
    return coeff @ _phase_matrix(cfg, n) / cfg.N


def build_basis_set(cfg: SystemConfig, max_order: int | None = None) -> BasisSet:
    order = 2 * cfg.V if max_order is None else max_order
    n = np.arange(-cfg.N_cp, cfg.N + 1)
    vals = basis_values(cfg, n, order)
    return BasisSet(vals[:, :-1], vals[:, 0].copy(), vals[:, -1].copy())


def dirichlet_basis(cfg: SystemConfig, n: np.ndarray) -> np.ndarray:
    """Closed form of ``f^(0)(n)`` for a contiguous subcarrier block.

    For ``k = k0 .. k0+K-1`` and ``m = n + N_cp`` the geometric sum gives
    ``sin(pi K m / N) / (N sin(pi m / N)) * exp(j pi (2 k0 + K - 1) m / N)``,
    with the limit ``K/N`` wherever ``m`` is a multiple of ``N``.
    """
    if not cfg.is_contiguous():
        raise ValueError("closed form requires a contiguous subcarrier block")
    k0 = int(cfg.k.min())
    m = np.asarray(n, dtype=float) + cfg.N_cp
    den = cfg.N * np.sin(np.pi * m / cfg.N)
    num = np.sin(np.pi * cfg.K * m / cfg.N)
    at_pole = np.isclose(np.mod(m, cfg.N), 0.0) | np.isclose(np.mod(m, cfg.N), cfg.N)
    safe = np.where(at_pole, 1.0, den)
    # sin(pi K m/N)/sin(pi m/N) -> K * (-1)^{(K-1) m/N} at the poles
    ratio = np.where(at_pole, cfg.K * (-1.0) ** ((cfg.K - 1) * np.round(m / cfg.N)) / cfg.N, num / safe)
    return ratio * np.exp(1j * np.pi * (2 * k0 + cfg.K - 1) * m / cfg.N)


def evaluate_derivatives(X: np.ndarray, n: int, orders: int, cfg: SystemConfig) -> np.ndarray:
    """``y^(v)(n)`` for ``v = 0..orders`` from the spectral representation.

    ``X`` may be batched ``(..., K)``; the result is ``(..., orders+1)``.
    """
    w = _orders_weights(cfg, orders) * _phase_matrix(cfg, np.array([n]))[:, 0][None, :]
    return np.asarray(X) @ w.T / cfg.N


@dataclass(frozen=True)
class SmootherMatrices:
    Pf: np.ndarray
    Pf_solver: tuple = field(repr=False)
    P1_tilde: np.ndarray  # (V, K)
    PV: np.ndarray  # (V, V+1)
    P2: np.ndarray  # (V, K)
    Qf: np.ndarray  # (N_cp+N, V+1)
    edge_end: np.ndarray  # f^(u)(N), u = 0..V
    cond: float = float("nan")

    @property
    def V(self) -> int:
        return self.Pf.shape[0] - 1

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        return linalg.lu_solve(self.Pf_solver, rhs)


def build_smoother_matrices(cfg: SystemConfig, basis: BasisSet | None = None) -> SmootherMatrices:
    basis = basis if basis is not None else build_basis_set(cfg)
    V = cfg.V
    if basis.max_order < 2 * V:
        raise ValueError(f"basis holds orders up to {basis.max_order}, need {2 * V}")
    uv = np.add.outer(np.arange(V + 1), np.arange(V + 1))
    Pf = basis.edge_start[uv]
    cond = float(np.linalg.cond(Pf))
    if not np.isfinite(cond) or cond > 1e14:
        raise ConditioningError("Pf", cond)
    weights = _orders_weights(cfg, V)[1:] / cfg.N
    P1_tilde = weights
    P2 = weights * np.exp(1j * cfg.phi * cfg.k)[None, :]
    PV = basis.edge_end[np.arange(1, V + 1)[:, None] + np.arange(V + 1)[None, :]]
    Qf = basis.vectors[:V + 1].T.copy()
    return SmootherMatrices(
        Pf=Pf,
        Pf_solver=linalg.lu_factor(Pf),
        P1_tilde=P1_tilde,
        PV=PV,
        P2=P2,
        Qf=Qf,
        edge_end=basis.edge_end[:V + 1].copy(),
        cond=cond,
    )


@dataclass
class SmootherState:
    """Memory carried from symbol ``i-1`` to symbol ``i``."""

    prev_X: np.ndarray
    prev_b: np.ndarray
    prev_end_value: complex
    index: int = 0

    @classmethod
    def initial(cls, X0: np.ndarray, y0: np.ndarray, cfg: SystemConfig) -> "SmootherState":
        """State after the first symbol, which is sent unsmoothed."""
        return cls(np.asarray(X0).copy(), np.zeros(cfg.V + 1, dtype=complex), complex(y0[cfg.N_cp]), 0)


def junction_rhs(state: SmootherState, X_i: np.ndarray, y_i_start: complex, mats: SmootherMatrices) -> np.ndarray:
    """Stacked mismatch ``dy_i`` between the end of ``i-1`` and the start of ``i``."""
    X_i = np.asarray(X_i)
    if X_i.shape != state.prev_X.shape:
        raise ValueError(f"data vector has shape {X_i.shape}, expected {state.prev_X.shape}")
    head = state.prev_end_value - y_i_start
    tail = mats.P1_tilde @ state.prev_X + mats.PV @ state.prev_b - mats.P2 @ X_i
    return np.concatenate([[head], tail])


def compute_coordinates(state: SmootherState, X_i: np.ndarray, y_i_start: complex, mats: SmootherMatrices) -> np.ndarray:
    return mats.solve(junction_rhs(state, X_i, y_i_start, mats))


def smooth_symbol(y_i: np.ndarray, b_i: np.ndarray, mats: SmootherMatrices) -> np.ndarray:
    y_i = np.asarray(y_i)
    if y_i.shape[-1] != mats.Qf.shape[0]:
        raise ValueError("symbol length does not match the basis length")
    return y_i + mats.Qf @ b_i


def advance(state: SmootherState, X_i: np.ndarray, y_i: np.ndarray, b_i: np.ndarray, mats: SmootherMatrices, N_cp: int) -> SmootherState:
    """State for the next symbol: ``ybar_i(N) = y_i(0) + sum_u b_u f^(u)(N)``."""
    end = complex(y_i[N_cp] + mats.edge_end @ b_i)
    return SmootherState(np.asarray(X_i).copy(), np.asarray(b_i).copy(), end, state.index + 1)


def full_recursion_rows(cfg: SystemConfig) -> tuple[np.ndarray, np.ndarray]:
    """Derivative rows ``v = 0..V`` acting on a full symbol body / on data.

    ``P1[v, n] = (1/N) sum_k (j 2 pi k/N)^v exp(-j 2 pi k n/N)`` maps the body
    of ``ybar_{i-1}`` to its derivatives at ``n = N``; ``P2`` maps ``X_i`` to
    the derivatives of ``y_i`` at ``n = -N_cp``.
    """
    w = _orders_weights(cfg, cfg.V)
    P1 = w @ _phase_matrix(cfg, np.arange(cfg.N)).conj() / cfg.N
    P2 = w * np.exp(1j * cfg.phi * cfg.k)[None, :] / cfg.N
    return P1, P2


def coordinates_from_full_symbol(prev_symbol: np.ndarray, X_i: np.ndarray, cfg: SystemConfig, mats: SmootherMatrices,
                                 rows: tuple[np.ndarray, np.ndarray] | None = None) -> np.ndarray:
    """Coordinates computed from the whole previous smoothed symbol.

    Unreduced counterpart of :func:`compute_coordinates`: the previous edge
    derivatives come from an ``(V+1) x N`` matrix acting on its body.
    """
    P1, P2 = rows if rows is not None else full_recursion_rows(cfg)
    prev_body = np.asarray(prev_symbol)[cfg.N_cp:cfg.N_cp + cfg.N]
    return mats.solve(P1 @ prev_body - P2 @ np.asarray(X_i))


class TDSmoother:
    """Per-stream smoother; :meth:`process` accepts consecutive blocks of data."""

    def __init__(self, cfg: SystemConfig, mats: SmootherMatrices | None = None):
        self.cfg = cfg
        self.mats = mats if mats is not None else build_smoother_matrices(cfg)
        self.state: SmootherState | None = None

    def reset(self) -> None:
        self.state = None

    def step(self, X_i: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Smooth one symbol; returns ``(ybar_i, b_i)``."""
        y = idft_modulate(X_i, self.cfg)
        if self.state is None:
            self.state = SmootherState.initial(X_i, y, self.cfg)
            return y, np.zeros(self.cfg.V + 1, dtype=complex)
        b = compute_coordinates(self.state, X_i, y[0], self.mats)
        self.state = advance(self.state, X_i, y, b, self.mats, self.cfg.N_cp)
        return smooth_symbol(y, b, self.mats), b

    def _recurse(self, X: np.ndarray, start_vals: np.ndarray, end_vals: np.ndarray) -> np.ndarray:
        """Coordinates for a block given ``y_i(-N_cp)`` and ``y_i(0)`` of each symbol."""
        cfg, m = self.cfg, self.mats
        S = X.shape[0]
        from_prev = X @ m.P1_tilde.T
        from_cur = X @ m.P2.T
        b = np.zeros((S, cfg.V + 1), dtype=complex)
        first = 0
        if self.state is None:
            self.state = SmootherState(X[0].copy(), np.zeros(cfg.V + 1, dtype=complex), complex(end_vals[0]), 0)
            first = 1
        st = self.state
        prev_X_term = m.P1_tilde @ st.prev_X
        prev_b, prev_end = st.prev_b, st.prev_end_value
        rhs = np.empty(cfg.V + 1, dtype=complex)
        for i in range(first, S):
            rhs[0] = prev_end - start_vals[i]
            rhs[1:] = prev_X_term + m.PV @ prev_b - from_cur[i]
            bi = m.solve(rhs)
            b[i] = bi
            prev_b = bi
            prev_end = end_vals[i] + m.edge_end @ bi
            prev_X_term = from_prev[i]
        self.state = SmootherState(X[-1].copy(), prev_b.copy(), complex(prev_end), st.index + S - first)
        return b

    def coordinates(self, X: np.ndarray) -> np.ndarray:
        """Coordinates ``b`` only, without synthesizing the waveform.

        Advances the stream state exactly as :meth:`process` does.
        """
        X = np.atleast_2d(np.asarray(X))
        edges = evaluate_at(X, np.array([-self.cfg.N_cp, 0]), self.cfg)
        return self._recurse(X, edges[:, 0], edges[:, 1])

    def process(self, X: np.ndarray, return_parts: bool = False):
        """Smooth a ``(S, K)`` block.

        Returns ``(ybar, b)`` with ``ybar`` of shape ``(S, N_cp+N)`` and
        ``b`` of shape ``(S, V+1)``; with ``return_parts`` the unsmoothed
        symbols ``y`` are returned as a third element (``ybar = y + w``).
        """
        cfg = self.cfg
        X = np.atleast_2d(np.asarray(X))
        y = idft_modulate(X, cfg)
        b = self._recurse(X, y[:, 0], y[:, cfg.N_cp])
        ybar = y + b @ self.mats.Qf.T
        if return_parts:
            return ybar, b, y
        return ybar, b


@dataclass
class StreamTrace:
    """Per-symbol record: original data and smoothing coordinates."""

    cfg: SystemConfig
    data: np.ndarray  # (S, K)
    coords: np.ndarray | None = None  # (S, V+1)

    def smooth_spectra(self) -> np.ndarray:
        """Spectral representation ``W_i`` of each smooth signal."""
        if self.coords is None:
            return np.zeros_like(self.data)
        return smooth_spectrum(self.coords, self.cfg)

    def composite_spectra(self) -> np.ndarray:
        """``X_i + W_i``: the spectrum whose IDFT is the transmitted symbol."""
        return self.data + self.smooth_spectra()


def smooth_spectrum(b: np.ndarray, cfg: SystemConfig) -> np.ndarray:
    """``W_k = sum_u b_u (j 2 pi k/N)^u exp(-j phi k)`` for coordinates ``b``."""
    b = np.asarray(b)
    V = b.shape[-1] - 1
    B1 = (_orders_weights(cfg, V) * np.exp(-1j * cfg.phi * cfg.k)[None, :]).T  # (K, V+1)
    return b @ B1.T


def td_smooth_stream(X: np.ndarray, cfg: SystemConfig, mats: SmootherMatrices | None = None) -> tuple[SampleStream, StreamTrace]:
    smoother = TDSmoother(cfg, mats)
    ybar, b = smoother.process(X)
    return assemble_stream(ybar), StreamTrace(cfg, np.atleast_2d(np.asarray(X)).copy(), b)


def continuity_residuals(trace: StreamTrace, orders: int | None = None) -> np.ndarray:
    """Junction mismatch ``ybar_i^(v)(-N_cp) - ybar_{i-1}^(v)(N)``.

    Shape ``(S-1, orders+1)``; row ``i-1`` belongs to the junction before
    symbol ``i``.
    """
    cfg = trace.cfg
    orders = cfg.V if orders is None else orders
    Z = trace.composite_spectra()
    start = evaluate_derivatives(Z[1:], -cfg.N_cp, orders, cfg)
    end = evaluate_derivatives(Z[:-1], cfg.N, orders, cfg)
    return start - end


def junction_scale(trace: StreamTrace, orders: int | None = None) -> np.ndarray:
    """Magnitude of the derivatives meeting at each junction, per order."""
    cfg = trace.cfg
    orders = cfg.V if orders is None else orders
    Z = trace.composite_spectra()
    end = evaluate_derivatives(Z[:-1], cfg.N, orders, cfg)
    return np.abs(end)


def write_trace_csv(path, trace: StreamTrace, orders: int | None = None) -> None:
    """Debug dump: symbol index, ``|b_i|`` per order, junction residuals."""
    cfg = trace.cfg
    orders = cfg.V if orders is None else orders
    res = np.abs(continuity_residuals(trace, orders))
    coords = np.abs(trace.coords) if trace.coords is not None else np.zeros((trace.data.shape[0], cfg.V + 1))
    head = ["symbol"] + [f"abs_b{v}" for v in range(coords.shape[1])] + [f"residual_v{v}" for v in range(orders + 1)]
    lines = [",".join(head)]
    for i in range(trace.data.shape[0]):
        r = res[i - 1] if i > 0 else np.zeros(orders + 1)
        lines.append(",".join([str(i)] + [f"{x:.6e}" for x in coords[i]] + [f"{x:.6e}" for x in r]))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
