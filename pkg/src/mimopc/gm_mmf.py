"""Geometric-mean per-cell max-min fairness power control.

Maximizes ``prod_l log2(1 + eps + t_l)`` subject to every user of cell ``l``
reaching SINR ``t_l``.  With ``t_l = exp(tt_l)`` and ``eta = exp(ee)`` each
SINR constraint becomes a log-sum-exp inequality, and the objective becomes
``sum_l log(log(1 + eps + exp(tt_l)))`` up to a constant.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np

from mimopc import convex
from mimopc.errors import InputError
from mimopc.model import ChannelStats, FadingTensor, NetworkConfig
from mimopc.sinr import Direction, PowerAllocation, SinrSeVector, evaluate, link_gains, sinr_from_gains

log = logging.getLogger(__name__)

ETA_LOG_FLOOR = -60.0
# keeps the barrier bounded below: log log(1 + eps + e^t) flattens as t -> -inf
TARGET_LOG_FLOOR = -60.0
NUM_RESTARTS = 5
WARM_TAU0 = 1e3


@dataclass(frozen=True)
class SinrProgram:
    """A log-domain SINR-target program and the map back to powers.

    Variables are ``[tt (num_targets), ee (N)]``.
    """

    program: convex.ConvexProgram
    num_targets: int
    target_of_user: np.ndarray  # (N,), -1 when the user carries no SINR constraint
    direction: Direction
    cell_size: int

    def split(self, x):
        return x[: self.num_targets], x[self.num_targets:]


def build_sinr_program(g, C, target_of_user, num_targets, objective_targets, direction, cell_size,
                       eta_floor=ETA_LOG_FLOOR, target_floor=TARGET_LOG_FLOOR) -> SinrProgram:
    """Log-domain program for ``SINR_i >= t_{target_of_user[i]}``.

    For user ``i`` with target ``a`` the constraint is::

        log( exp(tt_a - ee_i) / g_i + sum_j C_ij / g_i * exp(tt_a + ee_j - ee_i) ) <= 0

    UL powers get the box ``ee <= 0``; DL cells get ``log sum_k exp(ee_lk) <= 0``.
    """
    direction = Direction.parse(direction)
    N = len(g)
    T = int(num_targets)
    n = T + N
    term_ptr, log_coef, nz_ptr, nz_col, nz_val, bound = [0], [], [0], [], [], []

    def add_term(lc, cols, vals):
        log_coef.append(lc)
        nz_col.extend(cols)
        nz_val.extend(vals)
        nz_ptr.append(len(nz_col))

    for i in range(N):
        a = int(target_of_user[i])
        if a < 0:
            continue
        ta, ei = a, T + i
        lg = np.log(g[i])
        add_term(-lg, (ta, ei), (1.0, -1.0))
        for j in np.flatnonzero(C[i] > 0):
            if j == i:
                add_term(np.log(C[i, j]) - lg, (ta,), (1.0,))
            else:
                add_term(np.log(C[i, j]) - lg, (ta, T + j, ei), (1.0, 1.0, -1.0))
        term_ptr.append(len(log_coef))
        bound.append(0.0)
    lower = np.concatenate([np.full(T, target_floor), np.full(N, eta_floor)])
    upper = np.full(n, np.inf)
    if direction is Direction.UL:
        upper[T:] = 0.0
    else:
        for c in range(0, N, cell_size):
            for i in range(c, c + cell_size):
                add_term(0.0, (T + i,), (1.0,))
            term_ptr.append(len(log_coef))
            bound.append(0.0)
    objective = list(objective_targets) + [convex.Linear(0.0)] * N
    prog = convex.ConvexProgram(n, objective, term_ptr, log_coef, nz_ptr, nz_col, nz_val, bound, lower, upper)
    return SinrProgram(prog, T, np.asarray(target_of_user), direction, cell_size)


def heuristic_start(sp: SinrProgram, g, C, eta) -> np.ndarray:
    """Strictly feasible point: given powers, targets at half the achieved SINR."""
    sinr = sinr_from_gains(g, C, eta)
    tt = np.zeros(sp.num_targets)
    for a in range(sp.num_targets):
        users = sp.target_of_user == a
        tt[a] = np.log(0.5 * sinr[users].min())
    lo = sp.program.lower[: sp.num_targets]
    tt = np.maximum(tt, np.where(np.isfinite(lo), lo + 1.0, -np.inf))
    return np.concatenate([tt, np.log(eta)])


def uniform_powers(N, L, K):
    return np.full(N, 1.0 / (2 * L * K))


@dataclass(frozen=True)
class GmMmfResult:
    eta: PowerAllocation
    t_per_cell: np.ndarray  # (L,), 0 for excluded cells
    utility: float  # prod_l log2(1 + eps + t_l)
    solver: convex.SolverResult
    achieved: SinrSeVector
    excluded_cells: tuple[int, ...] = ()
    regime_warning: bool = False
    restarts: int = 0

    @property
    def ok(self) -> bool:
        return self.solver.ok


def gm_utility(t_per_cell, eps) -> float:
    return float(np.prod(np.log2(1.0 + eps + np.asarray(t_per_cell))))


def log_gm_utility(t_per_cell, eps) -> float:
    """``sum_l log(log2(1 + eps + t_l))``: logarithm of :func:`gm_utility`."""
    return float(np.sum(np.log(np.log2(1.0 + eps + np.asarray(t_per_cell)))))


def _strictly_feasible_powers(eta, direction, K, margin=0.999, floor=np.exp(-50.0)):
    eta = np.maximum(np.asarray(eta, dtype=float), floor)
    if direction is Direction.UL:
        return np.minimum(eta, margin)
    cells = eta.reshape(-1, K)
    scale = np.minimum(1.0, margin / cells.sum(axis=1))
    return (cells * scale[:, None]).ravel()


def _verification_starts(fading, stats, cfg, direction, eta0, seed):
    """Yield ``(powers, warm)`` starts; ``warm`` asks for a large initial barrier weight."""
    from mimopc.nw_mmf import solve_nw_mmf

    K = cfg.users_per_cell
    rng = np.random.default_rng(seed)
    equal = solve_nw_mmf(direction, fading, stats, cfg).eta.eta.ravel()
    full = np.ones(len(eta0)) if direction is Direction.UL else np.full(len(eta0), 1.0 / K)
    # full power is a corner optimum when SINRs are tiny; a small initial
    # weight would centre away from it
    starts = [(_strictly_feasible_powers(equal, direction, K), False),
              (_strictly_feasible_powers(full, direction, K), True)]
    for i in range(NUM_RESTARTS):
        base = equal if i % 2 == 0 else eta0
        jitter = np.exp(0.5 * rng.standard_normal(len(base)))
        starts.append((_strictly_feasible_powers(base * jitter, direction, K), False))
    return starts


def _solve(fading, stats, cfg, direction, opts, seed) -> GmMmfResult:
    direction = Direction.parse(direction)
    L, K = cfg.num_cells, cfg.users_per_cell
    g, C = link_gains(fading, stats, cfg, direction)
    N = L * K
    cell_of_user = np.repeat(np.arange(L), K)
    dead = np.unique(cell_of_user[~(g > 0)])
    if len(dead):
        log.warning("cells %s have a user without channel estimate; t_l fixed at 0", dead.tolist())
    live = np.setdiff1d(np.arange(L), dead)
    if len(live) == 0:
        raise InputError("no cell has all users with a non-zero channel estimate")
    target_index = -np.ones(L, dtype=int)
    target_index[live] = np.arange(len(live))
    target_of_user = target_index[cell_of_user]
    sp = build_sinr_program(
        g, C, target_of_user, len(live), [convex.LogLog1pExp(cfg.epsilon)] * len(live), direction, K,
    )
    eta0 = uniform_powers(N, L, K)
    res = convex.solve(sp.program, opts, x0=heuristic_start(sp, g, C, eta0))
    restarts = 0
    regime_warning = bool(np.any(sp.split(res.x)[0] < 0))
    if regime_warning:
        # concavity is only guaranteed for t >= 1: probe other basins from the
        # equal-SINR allocation, full power, and randomized perturbations of the
        # equal-SINR and uniform allocations
        base = opts or convex.SolverOptions()
        warm = replace(base, tau0=max(WARM_TAU0, base.tau0))
        for start, use_warm in _verification_starts(fading, stats, cfg, direction, eta0, seed):
            trial = convex.solve(sp.program, warm if use_warm else opts, x0=heuristic_start(sp, g, C, start))
            restarts += 1
            better = trial.objective_value > res.objective_value + 1e-12
            if trial.ok and (better or not res.ok):
                res = trial
    tt, ee = sp.split(res.x)
    eta = PowerAllocation(np.exp(ee).reshape(L, K), direction)
    t = np.zeros(L)
    t[live] = np.exp(tt)
    achieved = evaluate(fading, stats, eta, cfg)
    return GmMmfResult(
        eta=eta, t_per_cell=t, utility=gm_utility(t, cfg.epsilon), solver=res, achieved=achieved,
        excluded_cells=tuple(int(c) for c in dead), regime_warning=regime_warning, restarts=restarts,
    )


def solve_ul_gm_mmf(fading: FadingTensor, stats: ChannelStats, cfg: NetworkConfig,
                    opts: convex.SolverOptions | None = None, seed: int = 0) -> GmMmfResult:
    return _solve(fading, stats, cfg, Direction.UL, opts, seed)


def solve_dl_gm_mmf(fading: FadingTensor, stats: ChannelStats, cfg: NetworkConfig,
                    opts: convex.SolverOptions | None = None, seed: int = 0) -> GmMmfResult:
    return _solve(fading, stats, cfg, Direction.DL, opts, seed)


def solve_gm_mmf(direction, fading, stats, cfg, opts=None, seed=0) -> GmMmfResult:
    return _solve(fading, stats, cfg, direction, opts, seed)
