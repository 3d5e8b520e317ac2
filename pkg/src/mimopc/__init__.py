"""Large-scale fading power control for multi-cell massive MIMO.

Three fairness policies share one drop model and one SINR evaluator:

* ``nw_mmf``: network-wide max-min SINR, by bisection over a fixed-point
  feasibility test.
* ``gm_mmf``: per-cell max-min SINR, combined across cells by a geometric
  mean, solved as a log-sum-exp constrained convex program.
* ``nw_pf``: network-wide proportional fairness (product of SINRs).
"""
from mimopc.errors import ConfigError, InputError, SolverError
from mimopc.gm_mmf import solve_gm_mmf, solve_dl_gm_mmf, solve_ul_gm_mmf
from mimopc.harness import CampaignReport, CampaignSpec, Scheme, run_campaign
from mimopc.kernels import BACKEND
from mimopc.model import (
    ChannelStats,
    FadingTensor,
    NetworkConfig,
    compute_gamma,
    generate_drop,
    load_config,
)
from mimopc.nw_mmf import solve_nw_mmf, solve_dl_nw_mmf, solve_ul_nw_mmf
from mimopc.nw_pf import solve_nw_pf, solve_dl_nw_pf, solve_ul_nw_pf
from mimopc.sinr import Direction, PowerAllocation, evaluate, se_from_sinr

__version__ = "0.1.0"

__all__ = [
    "BACKEND", "CampaignReport", "CampaignSpec", "ChannelStats", "ConfigError", "Direction",
    "FadingTensor", "InputError", "NetworkConfig", "PowerAllocation", "Scheme", "SolverError",
    "compute_gamma", "evaluate", "generate_drop", "load_config", "run_campaign", "se_from_sinr",
    "solve_dl_gm_mmf", "solve_dl_nw_mmf", "solve_dl_nw_pf", "solve_gm_mmf", "solve_nw_mmf",
    "solve_nw_pf", "solve_ul_gm_mmf", "solve_ul_nw_mmf", "solve_ul_nw_pf",
]
