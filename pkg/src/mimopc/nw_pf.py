"""Network-wide proportional fairness: maximize the product of all SINRs.

In log variables this is a geometric program; it is solved with the same
log-sum-exp constraints as the per-cell scheme, one SINR target per user and
a linear objective ``sum tt_lk``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from mimopc import convex
from mimopc.errors import InputError
from mimopc.gm_mmf import build_sinr_program, heuristic_start, uniform_powers
from mimopc.model import ChannelStats, FadingTensor, NetworkConfig
from mimopc.sinr import Direction, PowerAllocation, SinrSeVector, evaluate, link_gains


@dataclass(frozen=True)
class NwPfResult:
    eta: PowerAllocation
    t_per_user: np.ndarray  # (L, K)
    log_product_utility: float
    solver: convex.SolverResult
    achieved: SinrSeVector

    @property
    def ok(self) -> bool:
        return self.solver.ok


def solve_nw_pf(direction, fading: FadingTensor, stats: ChannelStats, cfg: NetworkConfig,
                opts: convex.SolverOptions | None = None, weight: float = 1.0) -> NwPfResult:
    """``weight`` scales the objective; any positive value gives the same argmax."""
    direction = Direction.parse(direction)
    L, K = cfg.num_cells, cfg.users_per_cell
    g, C = link_gains(fading, stats, cfg, direction)
    if not np.all(g > 0):
        bad = [divmod(int(i), K) for i in np.flatnonzero(~(g > 0))]
        raise InputError(f"users (cell, k) {bad} have zero channel estimate; the SINR product is identically 0")
    N = L * K
    sp = build_sinr_program(g, C, np.arange(N), N, [convex.Linear(weight)] * N, direction, K)
    res = convex.solve(sp.program, opts, x0=heuristic_start(sp, g, C, uniform_powers(N, L, K)))
    tt, ee = sp.split(res.x)
    eta = PowerAllocation(np.exp(ee).reshape(L, K), direction)
    return NwPfResult(
        eta=eta, t_per_user=np.exp(tt).reshape(L, K), log_product_utility=float(np.sum(tt)),
        solver=res, achieved=evaluate(fading, stats, eta, cfg),
    )


def solve_ul_nw_pf(fading, stats, cfg, opts=None) -> NwPfResult:
    return solve_nw_pf(Direction.UL, fading, stats, cfg, opts)


def solve_dl_nw_pf(fading, stats, cfg, opts=None) -> NwPfResult:
    return solve_nw_pf(Direction.DL, fading, stats, cfg, opts)
