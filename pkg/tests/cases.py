"""Small hand-made instances shared by the test modules."""
import numpy as np

from mimopc.model import FadingTensor, NetworkConfig, compute_gamma

# rho_ul = rho_dl = 1: noise 0 dBm = 1 mW, UL 1 mW, DL 1 mW
UNIT_POWERS = dict(noise_power=0.0, ul_max_power=1.0, dl_max_power=1e-3)


def unit_cfg(L=1, K=1, M=2, **extra):
    return NetworkConfig(num_cells=L, users_per_cell=K, antennas=M, **UNIT_POWERS, **extra)


def instance(beta, cfg):
    fading = FadingTensor(np.asarray(beta, dtype=float))
    return fading, compute_gamma(fading, cfg)


def random_two_cell(seed):
    """L=2, K=1, M=10 with powers cut to 20 mW so SINRs span roughly 1e-3 to 10."""
    rng = np.random.default_rng(seed)
    cfg = NetworkConfig(num_cells=2, users_per_cell=1, antennas=10, ul_max_power=20.0, dl_max_power=0.02)
    beta = np.zeros((2, 2, 1))
    for l in range(2):
        for lp in range(2):
            lo, hi = (-125, -112) if l == lp else (-140, -120)
            beta[l, lp, 0] = 10 ** (rng.uniform(lo, hi) / 10)
    return (cfg, *instance(beta, cfg))


def random_single_cell_pair(seed):
    rng = np.random.default_rng(seed)
    cfg = NetworkConfig(num_cells=1, users_per_cell=2, antennas=10, ul_max_power=20.0, dl_max_power=0.02)
    beta = 10 ** (rng.uniform(-125, -110, size=(1, 1, 2)) / 10)
    return (cfg, *instance(beta, cfg))


def symmetric(L, K, own=1.0, cross=0.05, M=4):
    cfg = unit_cfg(L, K, M)
    beta = np.full((L, L, K), cross)
    for l in range(L):
        beta[l, l, :] = own
    return (cfg, *instance(beta, cfg))
