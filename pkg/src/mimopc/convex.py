"""Log-barrier interior-point solver for log-sum-exp constrained programs.

Problem class::

    maximize    sum_i obj_i(x_i)
    subject to  log(sum_j c_j exp(a_j . x)) <= b     (one per constraint)
                lower <= x <= upper

where every ``obj_i`` is either linear ``w * x`` or ``log(log(1 + eps + e^x))``.
The second form is concave for ``x >= 0``; where it is not, its curvature is
clipped to zero in the Newton system so steps stay descent directions.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Mapping, Sequence

import numpy as np
from scipy.optimize import nnls

from mimopc import kernels
from mimopc.errors import InputError


@dataclass(frozen=True)
class Linear:
    weight: float = 1.0


@dataclass(frozen=True)
class LogLog1pExp:
    eps: float


@dataclass(frozen=True)
class LseConstraint:
    """``log(sum_j coef_j * exp(sum_v n_v x_v)) <= bound``.

    ``terms`` holds ``(coef, {var: integer coefficient})`` pairs with
    ``coef > 0``.
    """

    terms: tuple[tuple[float, Mapping[int, int]], ...]
    bound: float

    def __post_init__(self):
        terms = tuple((float(c), dict(lin)) for c, lin in self.terms)
        if not terms:
            raise InputError("an LseConstraint needs at least one term")
        for c, lin in terms:
            if not c > 0:
                raise InputError(f"term coefficients must be > 0, got {c}")
            for v, a in lin.items():
                if int(a) != a:
                    raise InputError("variable coefficients must be integers")
        object.__setattr__(self, "terms", terms)

    def value(self, x) -> float:
        x = np.asarray(x, dtype=float)
        z = np.array([np.log(c) + sum(a * x[v] for v, a in lin.items()) for c, lin in self.terms])
        zmax = z.max()
        return float(zmax + np.log(np.sum(np.exp(z - zmax))))


def loglog1pexp(x, eps):
    """``log(log(1 + eps + e^x))`` with its first and second derivatives."""
    x = np.asarray(x, dtype=float)
    shift = np.log1p(eps)
    inner = np.logaddexp(shift, x)
    p = 0.5 * (1.0 + np.tanh(0.5 * (x - shift)))  # e^x / (1 + eps + e^x)
    d1 = p / inner
    d2 = p * (1.0 - p) / inner - d1**2
    return np.log(inner), d1, d2


class ConvexProgram:
    """Compiled problem data: a CSR stack of log-sum-exp terms plus a box."""

    def __init__(self, num_vars, objective, term_ptr, log_coef, nz_ptr, nz_col, nz_val, bound,
                 lower=None, upper=None):
        n = int(num_vars)
        self.num_vars = n
        self.lin_w = np.zeros(n)
        self.ll_idx = []
        ll_eps = []
        if len(objective) != n:
            raise InputError(f"objective needs one term per variable ({n}), got {len(objective)}")
        for i, term in enumerate(objective):
            if isinstance(term, Linear):
                self.lin_w[i] = term.weight
            elif isinstance(term, LogLog1pExp):
                if not term.eps > 0:
                    raise InputError("LogLog1pExp needs eps > 0")
                self.ll_idx.append(i)
                ll_eps.append(term.eps)
            else:
                raise InputError(f"unsupported objective term {term!r}")
        self.objective = tuple(objective)
        self.ll_idx = np.array(self.ll_idx, dtype=np.intp)
        self.ll_eps = np.array(ll_eps, dtype=float)
        self.term_ptr = np.asarray(term_ptr, dtype=np.intp)
        self.log_coef = np.asarray(log_coef, dtype=float)
        self.nz_ptr = np.asarray(nz_ptr, dtype=np.intp)
        self.nz_col = np.asarray(nz_col, dtype=np.intp)
        self.nz_val = np.asarray(nz_val, dtype=float)
        self.bound = np.asarray(bound, dtype=float)
        self.lower = np.full(n, -np.inf) if lower is None else np.asarray(lower, dtype=float).copy()
        self.upper = np.full(n, np.inf) if upper is None else np.asarray(upper, dtype=float).copy()
        if self.lower.shape != (n,) or self.upper.shape != (n,):
            raise InputError("bounds must have one entry per variable")
        if np.any(self.lower >= self.upper):
            raise InputError("need lower < upper for every variable")
        if len(self.nz_col) and (self.nz_col.min() < 0 or self.nz_col.max() >= n):
            raise InputError("constraint references a variable out of range")
        self._systems = {}

    @classmethod
    def build(cls, num_vars, objective: Sequence, constraints: Sequence[LseConstraint] = (),
              lower=None, upper=None) -> "ConvexProgram":
        term_ptr, log_coef, nz_ptr, nz_col, nz_val, bound = [0], [], [0], [], [], []
        for con in constraints:
            for c, lin in con.terms:
                log_coef.append(np.log(c))
                for v, a in sorted(lin.items()):
                    if a != 0:
                        nz_col.append(v)
                        nz_val.append(float(a))
                nz_ptr.append(len(nz_col))
            term_ptr.append(len(log_coef))
            bound.append(con.bound)
        return cls(num_vars, objective, term_ptr, log_coef, nz_ptr, nz_col, nz_val, bound, lower, upper)

    @property
    def num_constraints(self) -> int:
        return len(self.bound)

    def constraint(self, i) -> LseConstraint:
        terms = []
        for j in range(self.term_ptr[i], self.term_ptr[i + 1]):
            sl = slice(self.nz_ptr[j], self.nz_ptr[j + 1])
            lin = {int(v): int(a) for v, a in zip(self.nz_col[sl], self.nz_val[sl])}
            terms.append((float(np.exp(self.log_coef[j])), lin))
        return LseConstraint(tuple(terms), float(self.bound[i]))

    @property
    def constraints(self) -> list[LseConstraint]:
        return [self.constraint(i) for i in range(self.num_constraints)]

    def system(self, backend=None):
        name = backend or kernels.BACKEND
        if name not in self._systems:
            impl = kernels.get_backend(name)
            self._systems[name] = impl.LseSystem(self.term_ptr, self.log_coef, self.nz_ptr, self.nz_col,
                                                 self.nz_val, self.bound, self.num_vars)
        return self._systems[name]

    def objective_value(self, x) -> float:
        x = np.asarray(x, dtype=float)
        val = float(self.lin_w @ x)
        if len(self.ll_idx):
            val += float(np.sum(loglog1pexp(x[self.ll_idx], self.ll_eps)[0]))
        return val

    def objective_derivs(self, x):
        """Objective gradient and (unclipped) Hessian diagonal."""
        grad = self.lin_w.copy()
        hdiag = np.zeros(self.num_vars)
        if len(self.ll_idx):
            _, d1, d2 = loglog1pexp(x[self.ll_idx], self.ll_eps)
            grad[self.ll_idx] += d1
            hdiag[self.ll_idx] = d2
        return grad, hdiag

    def constraint_values(self, x):
        """``h(x) - bound`` (m,) and the gradients of ``h`` (m, n)."""
        if self.num_constraints == 0:
            return np.zeros(0), np.zeros((0, self.num_vars))
        h, G = self.system().values(np.asarray(x, dtype=float))
        return h - self.bound, G

    def max_violation(self, x) -> float:
        x = np.asarray(x, dtype=float)
        viol = [0.0, float(np.max(self.lower - x, initial=0.0)), float(np.max(x - self.upper, initial=0.0))]
        if self.num_constraints:
            viol.append(float(np.max(self.constraint_values(x)[0])))
        return max(viol)


class Status(str, Enum):
    OPTIMAL = "optimal"
    MAX_ITERS = "max_iters"
    INFEASIBLE = "infeasible"


@dataclass(frozen=True)
class SolverOptions:
    kkt_tol: float = 1e-7
    feas_tol: float = 1e-9
    gap_tol: float = 1e-9
    # centering stops when the Newton decrement, in objective units, is below this
    newton_tol: float = 1e-13
    max_outer: int = 500
    max_newton: int = 200
    mu: float = 20.0
    tau0: float = 1.0


@dataclass(frozen=True)
class SolverResult:
    x: np.ndarray
    objective_value: float
    kkt_residual: float
    status: Status
    iterations: int
    max_violation: float = 0.0
    phase_one_iterations: int = 0
    duality_gap: float = np.inf

    @property
    def ok(self) -> bool:
        return self.status is Status.OPTIMAL


class _Barrier:
    """``tau * (-objective) + barrier`` and its derivatives."""

    def __init__(self, prog: ConvexProgram):
        self.prog = prog
        self.sys = prog.system() if prog.num_constraints else None
        self.lo_idx = np.flatnonzero(np.isfinite(prog.lower))
        self.hi_idx = np.flatnonzero(np.isfinite(prog.upper))
        self.num_barrier_terms = prog.num_constraints + len(self.lo_idx) + len(self.hi_idx)

    def value(self, x, tau):
        prog = self.prog
        dl = x[self.lo_idx] - prog.lower[self.lo_idx]
        du = prog.upper[self.hi_idx] - x[self.hi_idx]
        if np.any(dl <= 0) or np.any(du <= 0):
            return np.inf
        phi = -np.sum(np.log(dl)) - np.sum(np.log(du))
        if self.sys is not None:
            phi += self.sys.barrier(x, False)
        return -tau * prog.objective_value(x) + phi

    def derivs(self, x, tau):
        prog = self.prog
        n = prog.num_vars
        if self.sys is not None:
            phi, grad, H = self.sys.barrier(x, True)
            if grad is None:
                return np.inf, None, None
        else:
            phi, grad, H = 0.0, np.zeros(n), np.zeros((n, n))
        dl = x[self.lo_idx] - prog.lower[self.lo_idx]
        du = prog.upper[self.hi_idx] - x[self.hi_idx]
        if np.any(dl <= 0) or np.any(du <= 0):
            return np.inf, None, None
        phi += -np.sum(np.log(dl)) - np.sum(np.log(du))
        grad = grad.copy()
        np.subtract.at(grad, self.lo_idx, 1.0 / dl)
        np.add.at(grad, self.hi_idx, 1.0 / du)
        hdiag = np.zeros(n)
        np.add.at(hdiag, self.lo_idx, 1.0 / dl**2)
        np.add.at(hdiag, self.hi_idx, 1.0 / du**2)
        og, oh = prog.objective_derivs(x)
        val = -tau * prog.objective_value(x) + phi
        grad = grad - tau * og
        hdiag += tau * np.maximum(-oh, 0.0)
        H = H + np.diag(hdiag)
        return val, grad, H


def _newton_direction(H, g):
    try:
        Lc = np.linalg.cholesky(H)
        return -np.linalg.solve(Lc.T, np.linalg.solve(Lc, g))
    except np.linalg.LinAlgError:
        shift = 1e-12 * max(1.0, float(np.max(np.abs(np.diag(H)))))
        for _ in range(12):
            try:
                Lc = np.linalg.cholesky(H + shift * np.eye(len(g)))
                return -np.linalg.solve(Lc.T, np.linalg.solve(Lc, g))
            except np.linalg.LinAlgError:
                shift *= 100.0
        return -g


def _initial_tau(bar: _Barrier, x, tau_min: float) -> float:
    """Weight that makes ``x`` closest to centred: argmin ||tau * grad f0 + grad phi||.

    Starting at a tiny weight lets the first centring step wander towards the
    analytic centre of the constraints and away from a good warm start.
    """
    _, g_phi, _ = bar.derivs(x, 0.0)
    if g_phi is None:
        return tau_min
    g_obj = -bar.prog.objective_derivs(x)[0]
    denom = float(g_obj @ g_obj)
    if denom <= 0.0:
        return tau_min
    return float(np.clip(-(g_obj @ g_phi) / denom, tau_min, 1e6 * tau_min))


def _barrier_method(prog: ConvexProgram, x0, opts: SolverOptions, stop: Callable | None = None):
    """Run the barrier method from a strictly feasible ``x0``.

    Returns ``(x, tau, iterations, converged, stopped)``.
    """
    bar = _Barrier(prog)
    x = np.array(x0, dtype=float)
    tau = _initial_tau(bar, x, opts.tau0)
    m = max(bar.num_barrier_terms, 1)
    iters = 0
    for _outer in range(opts.max_outer):
        centered = False
        for _ in range(opts.max_newton):
            val, g, H = bar.derivs(x, tau)
            if g is None:
                raise FloatingPointError("iterate left the barrier domain")
            dx = _newton_direction(H, g)
            slope = float(g @ dx)
            iters += 1
            if -slope / 2.0 <= opts.newton_tol * max(tau, 1.0):
                centered = True
                break
            step = 1.0
            while True:
                trial = x + step * dx
                tv = bar.value(trial, tau)
                if tv <= val + 0.25 * step * slope:
                    break
                step *= 0.5
                if step < 1e-16:
                    break
            if step < 1e-16:
                centered = True  # no further progress possible at this precision
                break
            x = trial
            if stop is not None and stop(x):
                return x, tau, iters, False, True
        if not centered:
            # a centring that does not converge within max_newton means the
            # iterate is jammed against the boundary; raising tau cannot help
            return x, tau, iters, False, False
        if m / tau <= opts.gap_tol:
            return x, tau, iters, True, False
        tau *= opts.mu
    return x, tau, iters, False, False


def kkt_residual(prog: ConvexProgram, x, tau: float) -> float:
    """KKT residual at ``x`` with multipliers refit on the near-active set.

    Barrier duals ``1/(tau s)`` select the active constraints; their values are
    then re-estimated by non-negative least squares, since tiny slacks make the barrier
    duals themselves inaccurate.  Returns the larger of the stationarity and
    complementarity violations.
    """
    x = np.asarray(x, dtype=float)
    n = prog.num_vars
    grads, slacks = [], []
    if prog.num_constraints:
        viol, G = prog.constraint_values(x)
        grads.append(G)
        slacks.append(-viol)
    lo = np.flatnonzero(np.isfinite(prog.lower))
    hi = np.flatnonzero(np.isfinite(prog.upper))
    eye = np.eye(n)
    grads += [-eye[lo], eye[hi]]
    slacks += [x[lo] - prog.lower[lo], prog.upper[hi] - x[hi]]
    G = np.vstack(grads) if grads else np.zeros((0, n))
    s = np.concatenate(slacks) if slacks else np.zeros(0)
    f_grad = -prog.objective_derivs(x)[0]  # gradient of the minimized objective
    if len(s) == 0:
        return float(np.max(np.abs(f_grad), initial=0.0))
    lam_bar = 1.0 / (tau * np.maximum(s, 1e-300))
    active = lam_bar > 1e-9 * (1.0 + lam_bar.max())
    lam = np.zeros(len(s))
    if np.any(active):
        # fit stationarity and complementarity jointly so that a loose bound
        # cannot absorb the multiplier of a tight one
        A = np.vstack([G[active].T, np.diag(s[active])])
        rhs = np.concatenate([-f_grad, np.zeros(int(active.sum()))])
        lam[active] = nnls(A, rhs)[0]
    stationarity = float(np.max(np.abs(f_grad + G.T @ lam), initial=0.0))
    complementarity = float(np.max(lam * np.abs(s), initial=0.0))
    return max(stationarity, complementarity)


def _interior_guess(prog: ConvexProgram):
    lo, hi = prog.lower, prog.upper
    x = np.zeros(prog.num_vars)
    both = np.isfinite(lo) & np.isfinite(hi)
    x[both] = 0.5 * (lo[both] + hi[both])
    only_lo = np.isfinite(lo) & ~np.isfinite(hi)
    x[only_lo] = np.maximum(0.0, lo[only_lo] + 1.0)
    only_hi = ~np.isfinite(lo) & np.isfinite(hi)
    x[only_hi] = np.minimum(0.0, hi[only_hi] - 1.0)
    return x


def _strictly_inside_box(prog, x):
    return bool(np.all(x > prog.lower) and np.all(x < prog.upper))


def _phase_one(prog: ConvexProgram, x0, opts: SolverOptions):
    """Minimize the largest constraint violation ``s`` until ``s < 0``."""
    n = prog.num_vars
    s_col = n
    nnz = np.diff(prog.nz_ptr)
    # append "-s" to every term
    new_nz_ptr = np.concatenate([[0], np.cumsum(nnz + 1)])
    new_col = np.empty(new_nz_ptr[-1], dtype=np.intp)
    new_val = np.empty(new_nz_ptr[-1])
    for j in range(len(nnz)):
        a, b = prog.nz_ptr[j], prog.nz_ptr[j + 1]
        o = new_nz_ptr[j]
        new_col[o:o + nnz[j]] = prog.nz_col[a:b]
        new_val[o:o + nnz[j]] = prog.nz_val[a:b]
        new_col[o + nnz[j]] = s_col
        new_val[o + nnz[j]] = -1.0
    aux = ConvexProgram(
        n + 1, [Linear(0.0)] * n + [Linear(-1.0)], prog.term_ptr, prog.log_coef, new_nz_ptr, new_col,
        new_val, prog.bound, np.append(prog.lower, -1.0), np.append(prog.upper, np.inf),
    )
    viol = prog.constraint_values(x0)[0]
    # s is floored at -1: only its sign matters and the floor removes the flat
    # direction along which x and s shift together
    z0 = np.append(x0, max(float(np.max(viol)), 0.0) + 1.0)

    def feasible(z):
        return bool(np.all(prog.constraint_values(z[:n])[0] < 0))

    z, _, iters, _, stopped = _barrier_method(aux, z0, opts, stop=feasible)
    return z[:n], iters, stopped or feasible(z)


def solve(program: ConvexProgram, opts: SolverOptions | None = None, x0=None) -> SolverResult:
    """Maximize ``program``; ``x0`` is used as start when strictly feasible."""
    opts = opts or SolverOptions()
    n = program.num_vars
    x = _interior_guess(program) if x0 is None else np.array(x0, dtype=float)
    if x.shape != (n,) or not np.all(np.isfinite(x)):
        raise InputError("x0 must be a finite vector with one entry per variable")
    if not _strictly_inside_box(program, x):
        x = np.clip(x, program.lower, program.upper)
        guess = _interior_guess(program)
        bad = ~((x > program.lower) & (x < program.upper))
        x[bad] = guess[bad]
    p1_iters = 0
    if program.num_constraints and not np.all(program.constraint_values(x)[0] < 0):
        x, p1_iters, ok = _phase_one(program, x, opts)
        if not ok:
            return SolverResult(x, program.objective_value(x), np.inf, Status.INFEASIBLE, p1_iters,
                                program.max_violation(x), p1_iters)
    try:
        with np.errstate(over="ignore", under="ignore"):
            x, tau, iters, converged, _ = _barrier_method(program, x, opts)
    except FloatingPointError:
        return SolverResult(x, program.objective_value(x), np.inf, Status.MAX_ITERS, p1_iters,
                            program.max_violation(x), p1_iters)
    bar_terms = program.num_constraints + int(np.sum(np.isfinite(program.lower)) + np.sum(np.isfinite(program.upper)))
    gap = bar_terms / tau
    kkt = kkt_residual(program, x, tau)
    viol = program.max_violation(x)
    ok = converged and kkt <= opts.kkt_tol and viol <= opts.feas_tol
    return SolverResult(
        x=x,
        objective_value=program.objective_value(x),
        kkt_residual=kkt,
        status=Status.OPTIMAL if ok else Status.MAX_ITERS,
        iterations=iters + p1_iters,
        max_violation=viol,
        phase_one_iterations=p1_iters,
        duality_gap=gap,
    )


def check_concavity(eps: float, grid) -> float:
    """Largest second divided difference of ``log(log(1 + eps + e^x))`` over ``grid``."""
    x = np.sort(np.asarray(grid, dtype=float))
    if len(x) < 3:
        raise InputError("need at least three grid points")
    f = loglog1pexp(x, eps)[0]
    slopes = np.diff(f) / np.diff(x)
    second = 2.0 * np.diff(slopes) / (x[2:] - x[:-2])
    return float(second.max())


def gradient_check(program: ConvexProgram, x, step: float = 1e-6) -> float:
    """Worst relative error between analytic and central-difference gradients.

    Covers the objective and every constraint. The error of each function is
    ``max|analytic - numeric| / max(1, max|numeric|)``.
    """
    x = np.asarray(x, dtype=float)
    n = program.num_vars
    funcs = [(program.objective_value, program.objective_derivs(x)[0])]
    if program.num_constraints:
        _, G = program.constraint_values(x)
        for i in range(program.num_constraints):
            funcs.append((lambda z, i=i: program.constraint_values(z)[0][i], G[i]))
    worst = 0.0
    for fn, analytic in funcs:
        numeric = np.empty(n)
        for v in range(n):
            e = np.zeros(n)
            e[v] = step
            numeric[v] = (fn(x + e) - fn(x - e)) / (2 * step)
        err = float(np.max(np.abs(analytic - numeric))) / max(1.0, float(np.max(np.abs(numeric))))
        worst = max(worst, err)
    return worst
