"""Network-wide max-min fairness by bisection on a common SINR target.

For a fixed target ``t`` the constraints ``SINR_i >= t`` read
``eta >= t (1 + C eta) / g``, a standard interference function.  Iterating it
from zero climbs monotonically to the smallest feasible powers, so the power
limit check on that limit point decides feasibility exactly.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from mimopc import kernels
from mimopc.errors import InputError
from mimopc.model import ChannelStats, FadingTensor, NetworkConfig
from mimopc.sinr import Direction, PowerAllocation, SinrSeVector, evaluate, link_gains

FP_TOL = 1e-12


@dataclass(frozen=True)
class BisectionOptions:
    """``tolerance`` is relative: stop once ``t_high - t_low <= tolerance * t_high``.

    ``t_high=None`` selects the interference-free bound ``max_i M rho gamma_i``.
    """

    t_low: float = 0.0
    t_high: float | None = None
    tolerance: float = 1e-6
    max_feasibility_iters: int = 10_000
    max_bisections: int = 200

    def __post_init__(self):
        if not self.t_low >= 0:
            raise InputError("t_low must be >= 0")
        if self.t_high is not None and not self.t_high > self.t_low:
            raise InputError("need t_low < t_high")
        if not self.tolerance > 0:
            raise InputError("tolerance must be > 0")


@dataclass(frozen=True)
class NwMmfResult:
    eta: PowerAllocation
    t_star: float
    bisection_iterations: int
    feasibility_trace: list = field(default_factory=list)  # [(t, feasible)]
    achieved: SinrSeVector | None = None

    @property
    def ok(self) -> bool:
        return True


def _feasibility(t, g, C, K, direction, max_iters):
    """Decide ``t`` with the fixed-point iteration; returns ``(feasible, eta_flat)``."""
    if t < 0:
        raise InputError("target SINR must be >= 0")
    N = len(g)
    if t == 0:
        return True, np.zeros(N)
    if not np.all(g > 0):
        return False, None
    status, eta, _ = kernels.fixed_point(g, C, float(t), K, direction is Direction.DL, FP_TOL, int(max_iters))
    return (True, eta) if status == 0 else (False, None)


def feasibility(direction, t, fading: FadingTensor, stats: ChannelStats, cfg: NetworkConfig,
                max_iters: int = 10_000):
    """``(feasible, minimal PowerAllocation or None)`` for a common SINR target ``t``."""
    direction = Direction.parse(direction)
    g, C = link_gains(fading, stats, cfg, direction)
    ok, eta = _feasibility(t, g, C, cfg.users_per_cell, direction, max_iters)
    if not ok:
        return False, None
    return True, PowerAllocation(eta.reshape(cfg.num_cells, cfg.users_per_cell), direction)


def feasibility_ul(t, fading, stats, cfg, max_iters=10_000):
    return feasibility(Direction.UL, t, fading, stats, cfg, max_iters)


def feasibility_dl(t, fading, stats, cfg, max_iters=10_000):
    return feasibility(Direction.DL, t, fading, stats, cfg, max_iters)


def solve_nw_mmf(direction, fading: FadingTensor, stats: ChannelStats, cfg: NetworkConfig,
                 opts: BisectionOptions | None = None) -> NwMmfResult:
    direction = Direction.parse(direction)
    opts = opts or BisectionOptions()
    L, K = cfg.num_cells, cfg.users_per_cell
    g, C = link_gains(fading, stats, cfg, direction)
    lo = opts.t_low
    hi = float(np.max(g)) if opts.t_high is None else opts.t_high
    trace = []
    ok, eta_lo = _feasibility(lo, g, C, K, direction, opts.max_feasibility_iters)
    trace.append((lo, ok))
    if not ok:
        raise InputError(f"lower bracket t_low={lo} is infeasible")
    iters = 0
    if hi > lo:
        ok, eta_hi = _feasibility(hi, g, C, K, direction, opts.max_feasibility_iters)
        trace.append((hi, ok))
        if ok:
            lo, eta_lo = hi, eta_hi
    while hi - lo > opts.tolerance * hi and iters < opts.max_bisections:
        mid = 0.5 * (lo + hi)
        ok, eta = _feasibility(mid, g, C, K, direction, opts.max_feasibility_iters)
        trace.append((mid, ok))
        iters += 1
        if ok:
            lo, eta_lo = mid, eta
        else:
            hi = mid
    alloc = PowerAllocation(eta_lo.reshape(L, K), direction)
    return NwMmfResult(
        eta=alloc, t_star=lo, bisection_iterations=iters, feasibility_trace=trace,
        achieved=evaluate(fading, stats, alloc, cfg),
    )


def solve_ul_nw_mmf(fading, stats, cfg, opts=None) -> NwMmfResult:
    return solve_nw_mmf(Direction.UL, fading, stats, cfg, opts)


def solve_dl_nw_mmf(fading, stats, cfg, opts=None) -> NwMmfResult:
    return solve_nw_mmf(Direction.DL, fading, stats, cfg, opts)
