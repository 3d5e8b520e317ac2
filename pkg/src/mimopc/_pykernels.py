"""Pure-NumPy versions of the compiled kernels in ``_ckernels.pyx``."""
import numpy as np


class LseSystem:
    def __init__(self, term_ptr, log_coef, nz_ptr, nz_col, nz_val, bound, n):
        term_ptr = np.asarray(term_ptr, dtype=np.intp)
        nz_ptr = np.asarray(nz_ptr, dtype=np.intp)
        self.log_coef = np.asarray(log_coef, dtype=float)
        self.bound = np.asarray(bound, dtype=float)
        self.m = len(self.bound)
        self.n = int(n)
        T = len(self.log_coef)
        rows = np.repeat(np.arange(T), np.diff(nz_ptr))
        self.A = np.zeros((T, self.n))
        np.add.at(self.A, (rows, np.asarray(nz_col, dtype=np.intp)), np.asarray(nz_val, dtype=float))
        self.seg = np.repeat(np.arange(self.m), np.diff(term_ptr))
        self.starts = term_ptr[:-1]

    def _weights(self, x):
        z = self.A @ x + self.log_coef
        zmax = np.maximum.reduceat(z, self.starts)
        e = np.exp(z - zmax[self.seg])
        total = np.add.reduceat(e, self.starts)
        h = zmax + np.log(total)
        return h, e / total[self.seg]

    def values(self, x):
        x = np.asarray(x, dtype=float)
        h, w = self._weights(x)
        G = np.add.reduceat(w[:, None] * self.A, self.starts, axis=0)
        return h, G

    def barrier(self, x, derivs=True):
        x = np.asarray(x, dtype=float)
        h, w = self._weights(x)
        s = self.bound - h
        if not np.all(s > 0):
            return (np.inf, None, None) if derivs else np.inf
        phi = -np.sum(np.log(s))
        if not derivs:
            return phi
        WA = w[:, None] * self.A
        G = np.add.reduceat(WA, self.starts, axis=0)
        inv_s = 1.0 / s
        grad = G.T @ inv_s
        H = (WA * inv_s[self.seg][:, None]).T @ self.A
        H += (G * (inv_s**2 - inv_s)[:, None]).T @ G
        return phi, grad, H


def fixed_point(g, C, t, cell_size, per_cell_budget, tol, max_iters):
    g = np.asarray(g, dtype=float)
    C = np.asarray(C, dtype=float)
    cur = np.zeros(len(g))
    scale = t / g
    for it in range(1, max_iters + 1):
        nxt = scale * (1.0 + C @ cur)
        if per_cell_budget:
            over = np.any(nxt.reshape(-1, cell_size).sum(axis=1) > 1.0)
        else:
            over = np.any(nxt > 1.0)
        if over:
            return 1, nxt, it
        change = np.max(np.abs(nxt - cur) / nxt)
        cur = nxt
        if change <= tol:
            return 0, cur, it
    return 2, cur, max_iters
