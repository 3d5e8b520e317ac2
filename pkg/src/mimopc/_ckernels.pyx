# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot loops: log-sum-exp barrier derivatives and the monotone
interference fixed-point iteration.  Mirrors ``mimopc._pykernels``."""
import numpy as np
cimport numpy as cnp
from libc.math cimport exp, log, fabs, INFINITY

cnp.import_array()


cdef class LseSystem:
    """Sparse stack of log-sum-exp constraints ``log sum_j exp(logc_j + a_j.x) <= b_i``."""
    cdef readonly Py_ssize_t m, n
    cdef Py_ssize_t[::1] term_ptr, nz_ptr, nz_col
    cdef double[::1] log_coef, nz_val, bound
    cdef double[::1] z, gi
    cdef Py_ssize_t[::1] touched
    cdef char[::1] mark

    def __init__(self, term_ptr, log_coef, nz_ptr, nz_col, nz_val, bound, Py_ssize_t n):
        self.term_ptr = np.ascontiguousarray(term_ptr, dtype=np.intp)
        self.log_coef = np.ascontiguousarray(log_coef, dtype=np.float64)
        self.nz_ptr = np.ascontiguousarray(nz_ptr, dtype=np.intp)
        self.nz_col = np.ascontiguousarray(nz_col, dtype=np.intp)
        self.nz_val = np.ascontiguousarray(nz_val, dtype=np.float64)
        self.bound = np.ascontiguousarray(bound, dtype=np.float64)
        self.m = self.bound.shape[0]
        self.n = n
        self.z = np.empty(self.log_coef.shape[0], dtype=np.float64)
        self.gi = np.zeros(n, dtype=np.float64)
        self.touched = np.empty(n, dtype=np.intp)
        self.mark = np.zeros(n, dtype=np.int8)

    cdef double _lse(self, Py_ssize_t i, const double[::1] x):
        cdef Py_ssize_t j, p
        cdef double zj, zmax = -INFINITY, acc = 0.0
        for j in range(self.term_ptr[i], self.term_ptr[i + 1]):
            zj = self.log_coef[j]
            for p in range(self.nz_ptr[j], self.nz_ptr[j + 1]):
                zj += self.nz_val[p] * x[self.nz_col[p]]
            self.z[j] = zj
            if zj > zmax:
                zmax = zj
        if zmax == -INFINITY:
            return zmax
        for j in range(self.term_ptr[i], self.term_ptr[i + 1]):
            acc += exp(self.z[j] - zmax)
        return zmax + log(acc)

    def values(self, x):
        """Constraint values ``h`` (m,) and dense gradients ``G`` (m, n)."""
        cdef const double[::1] xv = np.ascontiguousarray(x, dtype=np.float64)
        cdef Py_ssize_t i, j, p
        cdef double hi, w
        h_arr = np.empty(self.m, dtype=np.float64)
        G_arr = np.zeros((self.m, self.n), dtype=np.float64)
        cdef double[::1] h = h_arr
        cdef double[:, ::1] G = G_arr
        for i in range(self.m):
            hi = self._lse(i, xv)
            h[i] = hi
            for j in range(self.term_ptr[i], self.term_ptr[i + 1]):
                w = exp(self.z[j] - hi)
                for p in range(self.nz_ptr[j], self.nz_ptr[j + 1]):
                    G[i, self.nz_col[p]] += w * self.nz_val[p]
        return h_arr, G_arr

    def barrier(self, x, bint derivs=True):
        """``phi = -sum log(b - h(x))``; with ``derivs`` also its gradient and Hessian.

        Returns ``inf`` (or ``(inf, None, None)``) outside the strict interior.
        """
        cdef const double[::1] xv = np.ascontiguousarray(x, dtype=np.float64)
        cdef Py_ssize_t i, j, p, q, a, b, nt
        cdef double hi, s, w, wa, inv_s, coef, phi = 0.0
        cdef double[::1] grad
        cdef double[:, ::1] H
        cdef double[::1] gi = self.gi
        if derivs:
            grad_arr = np.zeros(self.n, dtype=np.float64)
            H_arr = np.zeros((self.n, self.n), dtype=np.float64)
            grad = grad_arr
            H = H_arr
        for i in range(self.m):
            hi = self._lse(i, xv)
            s = self.bound[i] - hi
            if not s > 0.0:
                return (INFINITY, None, None) if derivs else INFINITY
            phi -= log(s)
            if not derivs:
                continue
            inv_s = 1.0 / s
            nt = 0
            for j in range(self.term_ptr[i], self.term_ptr[i + 1]):
                w = exp(self.z[j] - hi)
                for p in range(self.nz_ptr[j], self.nz_ptr[j + 1]):
                    a = self.nz_col[p]
                    wa = w * self.nz_val[p]
                    if not self.mark[a]:
                        self.mark[a] = 1
                        self.touched[nt] = a
                        nt += 1
                    gi[a] += wa
                    for q in range(self.nz_ptr[j], self.nz_ptr[j + 1]):
                        H[a, self.nz_col[q]] += inv_s * wa * self.nz_val[q]
            coef = inv_s * inv_s - inv_s
            for p in range(nt):
                a = self.touched[p]
                grad[a] += gi[a] * inv_s
                for q in range(nt):
                    b = self.touched[q]
                    H[a, b] += coef * gi[a] * gi[b]
            for p in range(nt):
                a = self.touched[p]
                gi[a] = 0.0
                self.mark[a] = 0
        if derivs:
            return phi, grad_arr, H_arr
        return phi


def fixed_point(g, C, double t, Py_ssize_t cell_size, bint per_cell_budget,
                double tol, Py_ssize_t max_iters):
    """Iterate ``eta <- t (1 + C eta) / g`` from zero.

    Stops once every component changes by at most ``tol`` relative to itself.

    Returns ``(status, eta, iterations)``: status 0 converged within the power
    limits, 1 a limit was exceeded, 2 iteration budget exhausted.
    """
    cdef const double[::1] gv = np.ascontiguousarray(g, dtype=np.float64)
    cdef const double[:, ::1] Cv = np.ascontiguousarray(C, dtype=np.float64)
    cdef Py_ssize_t N = gv.shape[0]
    cdef Py_ssize_t it, i, j, c
    cdef double acc, change, v, cell_sum
    cur_arr = np.zeros(N, dtype=np.float64)
    nxt_arr = np.zeros(N, dtype=np.float64)
    cdef double[::1] cur = cur_arr
    cdef double[::1] nxt = nxt_arr
    cdef double[::1] tmp
    for it in range(1, max_iters + 1):
        change = 0.0
        for i in range(N):
            acc = 1.0
            for j in range(N):
                acc += Cv[i, j] * cur[j]
            v = t * acc / gv[i]
            nxt[i] = v
            if v > 0.0 and fabs(v - cur[i]) > change * v:
                change = fabs(v - cur[i]) / v
        if per_cell_budget:
            for c in range(0, N, cell_size):
                cell_sum = 0.0
                for i in range(c, c + cell_size):
                    cell_sum += nxt[i]
                if cell_sum > 1.0:
                    return 1, np.asarray(nxt).copy(), it
        else:
            for i in range(N):
                if nxt[i] > 1.0:
                    return 1, np.asarray(nxt).copy(), it
        tmp = cur
        cur = nxt
        nxt = tmp
        if change <= tol:
            return 0, np.asarray(cur).copy(), it
    return 2, np.asarray(cur).copy(), max_iters
