"""Compare the compiled and NumPy kernel backends on full-scale drops.

    python3 benchmarks/bench_kernels.py --drops 5 --repeat 20

Times the barrier evaluation (value, gradient, Hessian), one fixed-point
feasibility decision, and the end-to-end per-drop solves of every scheme.
"""
import argparse
import statistics
import timeit

import numpy as np

from mimopc import convex, kernels
from mimopc.gm_mmf import build_sinr_program, heuristic_start, uniform_powers
from mimopc.harness import ALL_SCHEMES, solve_scheme
from mimopc.model import NetworkConfig, compute_gamma, generate_drop
from mimopc.nw_mmf import FP_TOL, solve_nw_mmf
from mimopc.sinr import link_gains


def kernel_cases(cfg, drops):
    L, K = cfg.num_cells, cfg.users_per_cell
    N = L * K
    cases = []
    for seed in range(drops):
        _, fading = generate_drop(cfg, seed)
        stats = compute_gamma(fading, cfg)
        for d in ("ul", "dl"):
            g, C = link_gains(fading, stats, cfg, d)
            sp = build_sinr_program(g, C, np.repeat(np.arange(L), K), L, [convex.LogLog1pExp(cfg.epsilon)] * L, d, K)
            x = heuristic_start(sp, g, C, uniform_powers(N, L, K))
            t = 0.5 * solve_nw_mmf(d, fading, stats, cfg).t_star
            cases.append((d, sp.program, x, g, C, t))
    return cases


def best_of(fn, repeat, number):
    return min(timeit.repeat(fn, repeat=repeat, number=number)) / number


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--drops", type=int, default=3)
    p.add_argument("--repeat", type=int, default=10)
    args = p.parse_args(argv)
    backends = sorted(kernels.BACKENDS)
    if "cython" not in backends:
        print("compiled extension not built; only the NumPy backend is available")
    cfg = NetworkConfig()
    K = cfg.users_per_cell
    cases = kernel_cases(cfg, args.drops)
    rows = {}
    for name in backends:
        impl = kernels.get_backend(name)
        barrier, fixed = [], []
        for d, prog, x, g, C, t in cases:
            sysm = prog.system(name)
            barrier.append(best_of(lambda: sysm.barrier(x, True), args.repeat, 50))
            fixed.append(best_of(lambda: impl.fixed_point(g, C, t, K, d == "dl", FP_TOL, 10_000), args.repeat, 5))
        previous = kernels.set_backend(name)
        try:
            solves = []
            for seed in range(args.drops):
                _, fading = generate_drop(cfg, seed)
                stats = compute_gamma(fading, cfg)
                for s in ALL_SCHEMES:
                    for d in ("ul", "dl"):
                        solves.append(best_of(lambda: solve_scheme(s, d, fading, stats, cfg), 1, 1))
        finally:
            kernels.set_backend(previous)
        rows[name] = {
            "barrier+derivs [us]": 1e6 * statistics.median(barrier),
            "fixed point [us]": 1e6 * statistics.median(fixed),
            "scheme solve [ms]": 1e3 * statistics.median(solves),
            "drop, all schemes [s]": sum(solves) / args.drops,
        }
    metrics = list(rows[backends[0]])
    print(f"{'median over ' + str(args.drops) + ' drops':<24s}" + "".join(f"{b:>12s}" for b in backends)
          + ("     speedup" if len(backends) > 1 else ""))
    for m in metrics:
        line = f"{m:<24s}" + "".join(f"{rows[b][m]:12.3f}" for b in backends)
        if len(backends) > 1:
            line += f"{rows['python'][m] / rows['cython'][m]:11.1f}x"
        print(line)


if __name__ == "__main__":
    main()
