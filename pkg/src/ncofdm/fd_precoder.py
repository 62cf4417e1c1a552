"""Frequency-domain N-continuous precoder.

Each data vector is corrected by a projection onto the span of the
subcarrier-index power rows, so that the waveform and its first ``V``
derivatives match the previous symbol at the junction::

    Xbar_0 = X_0
    Xbar_i = (I - P) X_i + P Phi^H Xbar_{i-1}
    P      = Phi^H A^T (A A^T)^{-1} A Phi,   A[v, m] = k_m ** v,
    Phi    = diag(exp(j phi k_m)).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from .config import SystemConfig


class ConditioningError(np.linalg.LinAlgError):
    """A Gram matrix is numerically singular."""

    def __init__(self, what: str, cond: float):
        super().__init__(f"{what} is numerically singular (condition estimate {cond:.3e})")
        self.cond = cond


def build_A(cfg: SystemConfig, scaled: bool = True) -> tuple[np.ndarray, np.ndarray]:
    """Rows ``k_m ** v`` for ``v = 0..V``.

    With ``scaled`` each row ``v`` is multiplied by ``(2/K) ** v`` so all
    entries stay within ``[-1, 1]`` for the symmetric block. Returns the
    matrix and the per-row exponent base actually applied.
    """
    v = np.arange(cfg.V + 1)[:, None]
    k = cfg.k.astype(float)[None, :]
    base = 2.0 / cfg.K if scaled else 1.0
    A = (base * k) ** v
    return A, base ** np.arange(cfg.V + 1)


@dataclass(frozen=True)
class PrecoderMatrices:
    A: np.ndarray
    Phi: np.ndarray  # diagonal of Phi
    P: np.ndarray
    scale_exponents: np.ndarray
    gram_factor: tuple = field(repr=False)
    cond: float = float("nan")

    @property
    def V(self) -> int:
        return self.A.shape[0] - 1


def build_P(cfg: SystemConfig, scaled: bool = True, row_scale: np.ndarray | None = None) -> PrecoderMatrices:
    """Projection precoder built through a Cholesky solve of ``A A^T``.

    ``row_scale`` overrides the default scaling with an arbitrary diagonal
    (used to check that the projection does not depend on it).
    """
    A, scale = build_A(cfg, scaled=scaled and row_scale is None)
    if row_scale is not None:
        scale = np.asarray(row_scale, dtype=float)
        A = scale[:, None] * A
    G = A @ A.T
    cond = float(np.linalg.cond(G))
    if not np.isfinite(cond) or cond > 1e14:
        raise ConditioningError("A A^T", cond)
    factor = linalg.cho_factor(G)
    Phi = np.exp(1j * cfg.phi * cfg.k)
    # P = Phi^H A^T G^{-1} A Phi
    core = A.T @ linalg.cho_solve(factor, A)
    P = (Phi.conj()[:, None] * core) * Phi[None, :]
    return PrecoderMatrices(A, Phi, P, scale, factor, cond)


def projection_defects(mats: PrecoderMatrices) -> dict[str, float]:
    """Idempotence and Hermitian defects plus the trace."""
    P = mats.P
    nP = np.linalg.norm(P)
    return {
        "idempotence": float(np.linalg.norm(P @ P - P) / nP),
        "hermitian": float(np.linalg.norm(P - P.conj().T) / nP),
        "trace": complex(np.trace(P)),
    }


def fd_precode_step(X_i: np.ndarray, Xbar_prev: np.ndarray | None, mats: PrecoderMatrices) -> np.ndarray:
    X_i = np.asarray(X_i)
    K = mats.P.shape[0]
    if X_i.shape != (K,):
        raise ValueError(f"data vector has shape {X_i.shape}, expected ({K},)")
    if Xbar_prev is None:
        return X_i.copy()
    Xbar_prev = np.asarray(Xbar_prev)
    if Xbar_prev.shape != (K,):
        raise ValueError(f"previous vector has shape {Xbar_prev.shape}, expected ({K},)")
    P = mats.P
    return X_i - P @ X_i + P @ (mats.Phi.conj() * Xbar_prev)


class FDPrecoder:
    """Stateful precoder; feed blocks of consecutive symbols to :meth:`process`."""

    def __init__(self, cfg: SystemConfig, mats: PrecoderMatrices | None = None):
        self.cfg = cfg
        self.mats = mats if mats is not None else build_P(cfg)
        self.prev: np.ndarray | None = None
        # Xbar_i = (I - P) X_i + M Xbar_{i-1}
        self._I_minus_P = np.eye(cfg.K) - self.mats.P
        self._M = self.mats.P * self.mats.Phi.conj()[None, :]

    def reset(self) -> None:
        self.prev = None

    def process(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X))
        if X.shape[1] != self.cfg.K:
            raise ValueError(f"expected {self.cfg.K} subcarriers, got {X.shape[1]}")
        out = X @ self._I_minus_P.T
        start = 0
        if self.prev is None:
            out[0] = X[0]
            start = 1
            prev = out[0]
        else:
            prev = self.prev
        M = self._M
        for i in range(start, X.shape[0]):
            out[i] += M @ prev
            prev = out[i]
        self.prev = prev.copy()
        return out


def fd_precode_stream(X: np.ndarray, cfg: SystemConfig, mats: PrecoderMatrices | None = None) -> np.ndarray:
    """Precode a whole ``(S, K)`` sequence, starting with the ``i = 0`` rule."""
    return FDPrecoder(cfg, mats).process(X)
