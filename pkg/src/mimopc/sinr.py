"""Closed-form effective SINR and ergodic SE with maximum-ratio processing.

Every direction reduces to the same algebraic shape,

    SINR_i = g_i * eta_i / (1 + sum_j C_ij * eta_j),

over users ``i = l*K + k``; :func:`link_gains` returns ``(g, C)`` and the
solvers work on that form.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from mimopc.errors import InputError
from mimopc.model import ChannelStats, FadingTensor, NetworkConfig


class Direction(str, Enum):
    UL = "ul"
    DL = "dl"

    @classmethod
    def parse(cls, value) -> "Direction":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise InputError(f"direction must be 'ul' or 'dl', got {value!r}") from None


@dataclass(frozen=True)
class PowerAllocation:
    eta: np.ndarray  # (L, K)
    direction: Direction

    def __post_init__(self):
        eta = np.array(self.eta, dtype=float)
        eta.setflags(write=False)
        object.__setattr__(self, "eta", eta)
        object.__setattr__(self, "direction", Direction.parse(self.direction))

    def violation(self) -> float:
        """Largest violation of the power constraints (0 when valid)."""
        eta = self.eta
        neg = float(max(0.0, -eta.min()))
        if self.direction is Direction.UL:
            return max(neg, float(max(0.0, eta.max() - 1.0)))
        return max(neg, float(max(0.0, eta.sum(axis=1).max() - 1.0)))

    def check(self, tol: float = 1e-9):
        if self.eta.ndim != 2 or not np.all(np.isfinite(self.eta)):
            raise InputError("eta must be a finite (L, K) array")
        v = self.violation()
        if v > tol:
            raise InputError(f"{self.direction.value} power constraints violated by {v:.3g}")


@dataclass(frozen=True)
class SinrSeVector:
    sinr: np.ndarray  # (L, K)
    se: np.ndarray  # (L, K) bit/s/Hz
    per_cell_min_sinr: np.ndarray  # (L,)


def se_from_sinr(sinr, cfg: NetworkConfig):
    """Ergodic SE ``(1 - tau_p/tau_c) * log2(1 + sinr)``."""
    s = np.asarray(sinr, dtype=float)
    if np.any(s < 0) or np.any(np.isnan(s)):
        raise InputError("sinr must be >= 0")
    out = cfg.prelog * np.log2(1.0 + s)
    return float(out) if out.ndim == 0 else out


def _check_shapes(fading, stats, eta, cfg):
    L, K = cfg.num_cells, cfg.users_per_cell
    if fading.beta.shape != (L, L, K) or stats.gamma.shape != (L, L, K):
        raise InputError(f"beta/gamma must have shape {(L, L, K)}, got {fading.beta.shape}, {stats.gamma.shape}")
    if eta.eta.shape != (L, K):
        raise InputError(f"eta must have shape {(L, K)}, got {eta.eta.shape}")


def _pack(sinr, cfg) -> SinrSeVector:
    return SinrSeVector(sinr=sinr, se=se_from_sinr(sinr, cfg), per_cell_min_sinr=sinr.min(axis=1))


def ul_sinr(fading: FadingTensor, stats: ChannelStats, eta: PowerAllocation, cfg: NetworkConfig) -> SinrSeVector:
    if eta.direction is not Direction.UL:
        raise InputError("ul_sinr needs an UL allocation")
    _check_shapes(fading, stats, eta, cfg)
    eta.check()
    beta, gamma, e = fading.beta, stats.gamma, eta.eta
    M, rho = cfg.antennas, cfg.rho_ul
    L = cfg.num_cells
    own_gamma = gamma[np.arange(L), np.arange(L), :]  # gamma^l_{lk}
    # copilot and non-copilot cells merged: one sum over every (l', k')
    interference = rho * np.einsum("lpk,pk->l", beta, e)[:, None]
    contamination_gamma = gamma.copy()
    contamination_gamma[np.arange(L), np.arange(L), :] = 0.0
    contamination = M * rho * np.einsum("lpk,pk->lk", contamination_gamma, e)
    sinr = M * rho * own_gamma * e / (1.0 + interference + contamination)
    return _pack(sinr, cfg)


def dl_sinr(fading: FadingTensor, stats: ChannelStats, eta: PowerAllocation, cfg: NetworkConfig) -> SinrSeVector:
    if eta.direction is not Direction.DL:
        raise InputError("dl_sinr needs a DL allocation")
    _check_shapes(fading, stats, eta, cfg)
    eta.check()
    beta, gamma, e = fading.beta, stats.gamma, eta.eta
    M, rho = cfg.antennas, cfg.rho_dl
    L = cfg.num_cells
    own_gamma = gamma[np.arange(L), np.arange(L), :]
    cell_power = e.sum(axis=1)  # sum_k' eta_{l'k'}
    interference = rho * np.einsum("plk,p->lk", beta, cell_power)
    contamination_gamma = gamma.copy()
    contamination_gamma[np.arange(L), np.arange(L), :] = 0.0
    # gamma^{l'}_{lk} eta_{l'k}
    contamination = M * rho * np.einsum("plk,pk->lk", contamination_gamma, e)
    sinr = M * rho * own_gamma * e / (1.0 + interference + contamination)
    return _pack(sinr, cfg)


def evaluate(fading, stats, eta: PowerAllocation, cfg) -> SinrSeVector:
    """Dispatch on ``eta.direction``."""
    if eta.direction is Direction.UL:
        return ul_sinr(fading, stats, eta, cfg)
    return dl_sinr(fading, stats, eta, cfg)


def link_gains(fading: FadingTensor, stats: ChannelStats, cfg: NetworkConfig, direction) -> tuple[np.ndarray, np.ndarray]:
    """Signal gains ``g`` (N,) and coupling matrix ``C`` (N, N), ``N = L*K``.

    Users are flattened cell-major. ``C`` includes the user's own
    non-coherent term on its diagonal.
    """
    direction = Direction.parse(direction)
    beta, gamma = fading.beta, stats.gamma
    L, K, M = cfg.num_cells, cfg.users_per_cell, cfg.antennas
    idx = np.arange(L)
    contamination = gamma.copy()
    contamination[idx, idx, :] = 0.0
    same_pilot = np.eye(K)
    if direction is Direction.UL:
        rho = cfg.rho_ul
        g = M * rho * gamma[idx, idx, :]
        # C[(l,k),(l',k')] = rho beta^l_{l'k'} + [k'=k] M rho gamma^l_{l'k}
        C = rho * np.broadcast_to(beta[:, None, :, :], (L, K, L, K))
        C = C + M * rho * np.einsum("lpk,kq->lkpq", contamination, same_pilot)
    else:
        rho = cfg.rho_dl
        g = M * rho * gamma[idx, idx, :]
        # C[(l,k),(l',k')] = rho beta^{l'}_{lk} + [k'=k] M rho gamma^{l'}_{lk}
        C = rho * np.broadcast_to(np.transpose(beta, (1, 2, 0))[:, :, :, None], (L, K, L, K))
        C = C + M * rho * np.einsum("plk,kq->lkpq", contamination, same_pilot)
    N = L * K
    return g.reshape(N).copy(), np.ascontiguousarray(C.reshape(N, N))


def sinr_from_gains(g, C, eta) -> np.ndarray:
    eta = np.asarray(eta, dtype=float).ravel()
    return g * eta / (1.0 + C @ eta)
