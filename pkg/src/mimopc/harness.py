"""Monte-Carlo campaigns over random user drops.

Drop ``i`` uses seed ``base_seed + i`` and every scheme sees the same fading
tensor.  A drop on which any scheme fails is dropped from all aggregates so
that comparisons stay paired.
"""
from __future__ import annotations

import csv
import json
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from mimopc.errors import InputError
from mimopc.gm_mmf import log_gm_utility, solve_gm_mmf
from mimopc.model import NetworkConfig, compute_gamma, generate_drop
from mimopc.nw_mmf import solve_nw_mmf
from mimopc.nw_pf import solve_nw_pf
from mimopc.sinr import Direction, PowerAllocation, evaluate

log = logging.getLogger(__name__)

TIE_TOL = 1e-9
RECHECK_SLACK = 1e-6


class Scheme(str, Enum):
    GM_MMF = "gm_mmf"
    NW_MMF = "nw_mmf"
    NW_PF = "nw_pf"

    @classmethod
    def parse(cls, value) -> "Scheme":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower().replace("-", "_"))
        except ValueError:
            raise InputError(f"unknown scheme {value!r}; choose from {[s.value for s in cls]}") from None


ALL_SCHEMES = (Scheme.GM_MMF, Scheme.NW_MMF, Scheme.NW_PF)
ALL_DIRECTIONS = (Direction.UL, Direction.DL)


def key(scheme, direction) -> str:
    return f"{Scheme.parse(scheme).value}/{Direction.parse(direction).value}"


@dataclass(frozen=True)
class CampaignSpec:
    cfg: NetworkConfig
    num_drops: int
    base_seed: int = 0
    schemes: tuple = ALL_SCHEMES
    directions: tuple = ALL_DIRECTIONS
    workers: int = 1

    def __post_init__(self):
        if int(self.num_drops) < 1:
            raise InputError("num_drops must be >= 1")
        if not self.schemes:
            raise InputError("schemes must be non-empty")
        if not self.directions:
            raise InputError("directions must be non-empty")
        object.__setattr__(self, "schemes", tuple(Scheme.parse(s) for s in self.schemes))
        object.__setattr__(self, "directions", tuple(Direction.parse(d) for d in self.directions))


@dataclass
class SchemeOutcome:
    ok: bool
    eta: np.ndarray | None = None
    target: np.ndarray | None = None  # per-user SINR target the solver certified
    sinr: np.ndarray | None = None
    se: np.ndarray | None = None
    iterations: int = 0
    kkt_residual: float = 0.0
    regime_warning: bool = False
    error: str = ""


def solve_scheme(scheme, direction, fading, stats, cfg, seed=0) -> SchemeOutcome:
    """Run one scheme on one drop and re-check its solution through :mod:`mimopc.sinr`."""
    scheme = Scheme.parse(scheme)
    direction = Direction.parse(direction)
    L, K = cfg.num_cells, cfg.users_per_cell
    try:
        if scheme is Scheme.GM_MMF:
            r = solve_gm_mmf(direction, fading, stats, cfg, seed=seed)
            out = SchemeOutcome(ok=r.ok, eta=r.eta.eta, target=np.repeat(r.t_per_cell[:, None], K, axis=1),
                                iterations=r.solver.iterations, kkt_residual=r.solver.kkt_residual,
                                regime_warning=r.regime_warning, error="" if r.ok else r.solver.status.value)
        elif scheme is Scheme.NW_PF:
            r = solve_nw_pf(direction, fading, stats, cfg)
            out = SchemeOutcome(ok=r.ok, eta=r.eta.eta, target=r.t_per_user, iterations=r.solver.iterations,
                                kkt_residual=r.solver.kkt_residual, error="" if r.ok else r.solver.status.value)
        else:
            r = solve_nw_mmf(direction, fading, stats, cfg)
            out = SchemeOutcome(ok=True, eta=r.eta.eta, target=np.full((L, K), r.t_star),
                                iterations=r.bisection_iterations)
    except (InputError, ArithmeticError, np.linalg.LinAlgError) as exc:
        return SchemeOutcome(ok=False, error=f"{type(exc).__name__}: {exc}")
    achieved = evaluate(fading, stats, PowerAllocation(out.eta, direction), cfg)
    out.sinr, out.se = achieved.sinr, achieved.se
    if out.ok:
        problem = recheck(out, direction)
        if problem:
            out.ok, out.error = False, problem
    return out


def recheck(out: SchemeOutcome, direction) -> str:
    """Empty string when the solution meets its power limits and SINR targets."""
    viol = PowerAllocation(out.eta, direction).violation()
    if viol > RECHECK_SLACK:
        return f"power limits violated by {viol:.3g}"
    short = out.target - out.sinr - RECHECK_SLACK * np.maximum(1.0, out.target)
    if np.any(short > 0):
        return f"SINR target missed by {float(short.max()):.3g}"
    return ""


def run_drop(cfg: NetworkConfig, seed: int, schemes, directions) -> dict:
    _, fading = generate_drop(cfg, seed)
    stats = compute_gamma(fading, cfg)
    return {
        key(s, d): solve_scheme(s, d, fading, stats, cfg, seed=seed)
        for d in directions for s in schemes
    }


def _run_drop_args(args):
    return run_drop(*args)


@dataclass
class CampaignReport:
    """Per-user results of a campaign, restricted to drops where every scheme succeeded.

    Arrays are keyed ``"scheme/direction"``; ``se[k]`` and ``sinr[k]`` have
    shape ``(num_ok_drops, L, K)``.
    """

    spec: dict
    drops: list  # included drop indices
    failed_drops: dict  # drop index -> reason
    failure_counts: dict  # key -> count
    sinr: dict
    se: dict
    eta: dict
    target: dict
    regime_warnings: dict
    wall_clock: dict = field(default_factory=dict)

    @property
    def keys(self):
        return sorted(self.se)

    @property
    def epsilon(self) -> float:
        return float(self.spec["cfg"]["epsilon"])

    def samples(self, scheme, direction) -> np.ndarray:
        return self.se[key(scheme, direction)].reshape(-1)

    def sum_se(self, scheme, direction) -> np.ndarray:
        return self.se[key(scheme, direction)].sum(axis=(1, 2))

    def win_percentage(self, a, b, direction) -> float:
        """Percentage of user samples where scheme ``a`` has strictly higher SE than ``b``."""
        sa, sb = self.samples(a, direction), self.samples(b, direction)
        if len(sa) == 0:
            return float("nan")
        return 100.0 * float(np.mean(sa > sb + TIE_TOL))

    def win_table(self) -> dict:
        table = {}
        present = {k.split("/")[0] for k in self.se}
        for d in {k.split("/")[1] for k in self.se}:
            for a in sorted(present):
                for b in sorted(present):
                    if a != b:
                        table[f"{a}>{b}/{d}"] = self.win_percentage(a, b, d)
        return table

    def to_dict(self, include_timing=False) -> dict:
        out = {
            "spec": self.spec,
            "drops": list(self.drops),
            "failed_drops": {str(k): v for k, v in sorted(self.failed_drops.items())},
            "failure_counts": dict(sorted(self.failure_counts.items())),
            "win_percentages": dict(sorted(self.win_table().items())),
            "regime_warnings": dict(sorted(self.regime_warnings.items())),
            "results": {
                k: {
                    "sinr": self.sinr[k].tolist(),
                    "se": self.se[k].tolist(),
                    "eta": self.eta[k].tolist(),
                    "target": self.target[k].tolist(),
                }
                for k in self.keys
            },
        }
        if include_timing:
            out["wall_clock"] = self.wall_clock
        return out

    def to_json(self, path=None, include_timing=False) -> str:
        text = json.dumps(self.to_dict(include_timing), sort_keys=True, indent=1)
        if path is not None:
            with open(path, "w", encoding="utf-8", newline="\n") as fh:
                fh.write(text)
        return text

    @classmethod
    def from_dict(cls, d: dict) -> "CampaignReport":
        res = d["results"]
        arr = lambda name: {k: np.asarray(v[name], dtype=float) for k, v in res.items()}
        return cls(
            spec=d["spec"], drops=list(d["drops"]),
            failed_drops={int(k): v for k, v in d["failed_drops"].items()},
            failure_counts=dict(d["failure_counts"]), sinr=arr("sinr"), se=arr("se"), eta=arr("eta"),
            target=arr("target"), regime_warnings=dict(d.get("regime_warnings", {})),
            wall_clock=dict(d.get("wall_clock", {})),
        )

    @classmethod
    def from_json(cls, path) -> "CampaignReport":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))

    def write_csv(self, path):
        """Flat per-user table: drop, scheme, direction, l, k, sinr, se."""
        with open(path, "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["drop", "scheme", "direction", "l", "k", "sinr", "se"])
            for k in self.keys:
                scheme, direction = k.split("/")
                sinr, se = self.sinr[k], self.se[k]
                for i, drop in enumerate(self.drops):
                    for l in range(sinr.shape[1]):
                        for u in range(sinr.shape[2]):
                            w.writerow([drop, scheme, direction, l, u, fmt(sinr[i, l, u]), fmt(se[i, l, u])])

    def write_cdf_csv(self, path):
        with open(path, "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["scheme", "direction", "se", "cdf"])
            for k in self.keys:
                scheme, direction = k.split("/")
                for value, frac in cdf_points(self.se[k].reshape(-1)):
                    w.writerow([scheme, direction, fmt(value), fmt(frac)])


def fmt(v) -> str:
    return f"{float(v):.12g}"


def run_campaign(spec: CampaignSpec) -> CampaignReport:
    cfg = spec.cfg
    seeds = [spec.base_seed + i for i in range(spec.num_drops)]
    jobs = [(cfg, s, spec.schemes, spec.directions) for s in seeds]
    t0 = time.perf_counter()
    if spec.workers > 1:
        with ProcessPoolExecutor(max_workers=spec.workers) as pool:
            outcomes = list(pool.map(_run_drop_args, jobs, chunksize=max(1, len(jobs) // (8 * spec.workers))))
    else:
        outcomes = [run_drop(*job) for job in jobs]
    elapsed = time.perf_counter() - t0

    keys = [key(s, d) for d in spec.directions for s in spec.schemes]
    failure_counts = {k: 0 for k in keys}
    regime = {k: 0 for k in keys}
    failed, included = {}, []
    for i, out in enumerate(outcomes):
        bad = [k for k in keys if not out[k].ok]
        for k in bad:
            failure_counts[k] += 1
        for k in keys:
            regime[k] += int(out[k].regime_warning)
        if bad:
            failed[i] = "; ".join(f"{k}: {out[k].error}" for k in bad)
            log.warning("drop %d excluded: %s", i, failed[i])
        else:
            included.append(i)

    L, K = cfg.num_cells, cfg.users_per_cell

    def stack(name):
        return {
            k: np.array([getattr(outcomes[i][k], name) for i in included], dtype=float).reshape(-1, L, K)
            for k in keys
        }

    return CampaignReport(
        spec={
            "cfg": cfg.to_dict(), "num_drops": spec.num_drops, "base_seed": spec.base_seed,
            "schemes": [s.value for s in spec.schemes], "directions": [d.value for d in spec.directions],
        },
        drops=included, failed_drops=failed, failure_counts=failure_counts,
        sinr=stack("sinr"), se=stack("se"), eta=stack("eta"), target=stack("target"),
        regime_warnings=regime,
        wall_clock={"total_s": elapsed, "per_drop_s": elapsed / spec.num_drops, "workers": spec.workers},
    )


def cdf_points(samples) -> list[tuple[float, float]]:
    """Empirical CDF: the i-th smallest value paired with ``i / N``."""
    x = np.sort(np.asarray(samples, dtype=float).reshape(-1))
    if len(x) == 0:
        raise InputError("cdf_points needs at least one sample")
    n = len(x)
    return [(float(v), (i + 1) / n) for i, v in enumerate(x)]


def percentile(samples, q: float) -> float:
    """Smallest sample whose empirical CDF reaches ``q`` percent."""
    x = np.sort(np.asarray(samples, dtype=float).reshape(-1))
    if len(x) == 0:
        raise InputError("percentile needs at least one sample")
    if not 0 < q <= 100:
        raise InputError("q must be in (0, 100]")
    idx = max(0, math.ceil(q / 100.0 * len(x) - 1e-9) - 1)
    return float(x[idx])


def crossing_percentile(a_samples, b_samples) -> float:
    """Percentile at which the CDF of ``a`` stops lying right of the CDF of ``b``.

    Compares the sorted samples rank by rank and returns ``100 * i / N`` for the
    first rank ``i`` where ``a`` falls below ``b``; 0 when ``a`` is never ahead
    at the bottom and 100 when it is never overtaken.
    """
    a = np.sort(np.asarray(a_samples, dtype=float).reshape(-1))
    b = np.sort(np.asarray(b_samples, dtype=float).reshape(-1))
    if len(a) != len(b) or len(a) == 0:
        raise InputError("need two non-empty samples of equal size")
    behind = np.flatnonzero(a < b - TIE_TOL)
    if len(behind) == 0:
        return 100.0
    return 100.0 * behind[0] / len(a)


def per_drop_metrics(report: CampaignReport, direction) -> dict:
    """Per-drop fairness metrics of each scheme's allocation.

    Returns ``{scheme: {"min_sinr", "log_gm", "log_pf"}}`` arrays over drops.
    """
    out = {}
    eps = report.epsilon
    for k in report.keys:
        scheme, d = k.split("/")
        if d != Direction.parse(direction).value:
            continue
        sinr = report.sinr[k]
        with np.errstate(divide="ignore"):
            out[scheme] = {
                "min_sinr": sinr.min(axis=(1, 2)),
                "log_gm": np.array([log_gm_utility(s.min(axis=1), eps) for s in sinr]),
                "log_pf": np.sum(np.log(sinr), axis=(1, 2)),
            }
    return out
