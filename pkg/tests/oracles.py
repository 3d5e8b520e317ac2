"""Reference implementations used as test oracles.

Plain loops over the closed-form expressions and exhaustive power grids.
Nothing here imports the solvers, so agreement is evidence, not tautology.
"""
import numpy as np


def gamma_loop(beta, rho_ul, tau_p, reuse_sets):
    L, _, K = beta.shape
    set_of = {c: s for s in reuse_sets for c in s}
    out = np.zeros_like(beta)
    for l in range(L):
        for lp in range(L):
            if lp not in set_of[l]:
                continue
            for k in range(K):
                denom = 1.0 + tau_p * rho_ul * sum(beta[l, j, k] for j in set_of[l])
                out[l, lp, k] = tau_p * rho_ul * beta[l, lp, k] ** 2 / denom
    return out


def ul_sinr_loop(beta, gamma, eta, M, rho, reuse_sets):
    L, _, K = beta.shape
    set_of = {c: s for s in reuse_sets for c in s}
    out = np.zeros((L, K))
    for l in range(L):
        for k in range(K):
            num = M * rho * gamma[l, l, k] * eta[l, k]
            den = 1.0
            for lp in range(L):
                for kp in range(K):
                    den += rho * beta[l, lp, kp] * eta[lp, kp]
            for lp in set_of[l]:
                if lp != l:
                    den += M * rho * gamma[l, lp, k] * eta[lp, k]
            out[l, k] = num / den
    return out


def dl_sinr_loop(beta, gamma, eta, M, rho, reuse_sets):
    L, _, K = beta.shape
    set_of = {c: s for s in reuse_sets for c in s}
    out = np.zeros((L, K))
    for l in range(L):
        for k in range(K):
            num = M * rho * gamma[l, l, k] * eta[l, k]
            den = 1.0
            for lp in range(L):
                den += rho * beta[lp, l, k] * eta[lp].sum()
            for lp in set_of[l]:
                if lp != l:
                    den += M * rho * gamma[lp, l, k] * eta[lp, k]
            out[l, k] = num / den
    return out


GRID = np.arange(1, 1001) / 1000.0


def two_cell_sinr_grid(beta, gamma, M, rho, direction):
    """SINRs of an L=2, K=1 instance on the 1e-3 grid of (eta_1, eta_2) in (0, 1]^2."""
    e1, e2 = np.meshgrid(GRID, GRID, indexing="ij")
    eta = (e1, e2)
    out = []
    for l in range(2):
        o = 1 - l
        num = M * rho * gamma[l, l, 0] * eta[l]
        if direction == "ul":
            den = 1 + rho * (beta[l, l, 0] * eta[l] + beta[l, o, 0] * eta[o]) + M * rho * gamma[l, o, 0] * eta[o]
        else:
            den = 1 + rho * (beta[l, l, 0] * eta[l] + beta[o, l, 0] * eta[o]) + M * rho * gamma[o, l, 0] * eta[o]
        out.append(num / den)
    return out


def single_cell_pair_grid(beta, gamma, M, rho, direction):
    """SINRs of an L=1, K=2 instance over the 1e-3 power grid.

    UL: both powers on (0, 1]; DL: eta_1 on the grid and eta_2 = 1 - eta_1
    (the budget binds at the product optimum since each SINR grows in its own power).
    """
    if direction == "ul":
        e1, e2 = np.meshgrid(GRID, GRID, indexing="ij")
    else:
        e1 = GRID[:-1]
        e2 = 1.0 - e1
    eta = (e1, e2)
    out = []
    for k in range(2):
        num = M * rho * gamma[0, 0, k] * eta[k]
        if direction == "ul":
            den = 1 + rho * (beta[0, 0, 0] * e1 + beta[0, 0, 1] * e2)
        else:
            den = 1 + rho * beta[0, 0, k] * (e1 + e2)
        out.append(num / den)
    return out


def second_derivative_fd(f, x, h=1e-4):
    return (f(x + h) - 2.0 * f(x) + f(x - h)) / h**2
