"""Generic NLP container and a deterministic augmented-Lagrangian solver.

Problems are stacked from labeled constraint blocks (vector value plus
dense Jacobian) over box-bounded variables.  The solver runs a standard
multiplier method: equalities get linear multiplier updates, inequalities
a one-sided quadratic penalty with clipped updates, and each bound-
constrained subproblem is minimized with a projected limited-memory
quasi-Newton method (scipy's L-BFGS-B).  Everything is deterministic
given identical inputs.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from empc.errors import NumericFailureError


# ----------------------------------------------------------------------
# Problem containers
# ----------------------------------------------------------------------


class Block:
    """Labeled constraint block: fun(z) -> (values (dim,), jacobian (dim, nv))."""

    def __init__(self, label, fun, dim, row_labels=None):
        self.label = label
        self.fun = fun
        self.dim = dim
        self.row_labels = tuple(row_labels) if row_labels is not None else \
            tuple(f"{label}[{i}]" for i in range(dim))

    def eval(self, z):
        vals, jac = self.fun(z)
        return vals, jac


class LinearBlock(Block):
    """Affine block: values = M z + b with constant Jacobian."""

    def __init__(self, label, M, b, row_labels=None):
        M = np.asarray(M, dtype=float)
        b = np.asarray(b, dtype=float)
        self.M = M
        self.b = b
        super().__init__(label, self._eval, M.shape[0], row_labels)

    def _eval(self, z):
        return self.M @ z + self.b, self.M


@dataclass(frozen=True)
class NlpProblem:
    """Finite-dimensional NLP over box-bounded variables.

    ``objective(z) -> (value, gradient)``; equality blocks target 0,
    inequality blocks target <= 0.  All callables must be pure and
    deterministic.
    """

    num_vars: int
    var_lo: np.ndarray
    var_hi: np.ndarray
    objective: object
    eq_blocks: tuple = ()
    ineq_blocks: tuple = ()

    @property
    def num_eq(self) -> int:
        return sum(b.dim for b in self.eq_blocks)

    @property
    def num_ineq(self) -> int:
        return sum(b.dim for b in self.ineq_blocks)

    def eval_eq(self, z):
        if not self.eq_blocks:
            return np.zeros(0), np.zeros((0, self.num_vars))
        parts = [self._checked(b, z) for b in self.eq_blocks]
        return (np.concatenate([v for v, _ in parts]),
                np.vstack([J for _, J in parts]))

    def eval_ineq(self, z):
        if not self.ineq_blocks:
            return np.zeros(0), np.zeros((0, self.num_vars))
        parts = [self._checked(b, z) for b in self.ineq_blocks]
        return (np.concatenate([v for v, _ in parts]),
                np.vstack([J for _, J in parts]))

    def eval_objective(self, z):
        f, g = self.objective(z)
        if not (np.isfinite(f) and np.all(np.isfinite(g))):
            raise NumericFailureError("objective")
        return f, g

    @staticmethod
    def _checked(block, z):
        vals, jac = block.eval(z)
        if not (np.all(np.isfinite(vals)) and np.all(np.isfinite(jac))):
            raise NumericFailureError(block.label)
        return vals, jac

    def eq_row_labels(self):
        return [lab for b in self.eq_blocks for lab in b.row_labels]

    def ineq_row_labels(self):
        return [lab for b in self.ineq_blocks for lab in b.row_labels]


@dataclass(frozen=True)
class SolverOptions:
    """Centralized solver tolerances; defaults are the shipped contract."""

    feas_tol: float = 1e-8
    stat_tol: float = 1e-6
    penalty0: float = 10.0
    penalty_growth: float = 10.0
    penalty_cap: float = 1e12
    max_outer: int = 50
    max_inner: int = 500
    trace: bool = False


@dataclass(frozen=True)
class MultiplierState:
    """Multipliers, penalty, and inner tolerance carried across
    warm-started solves of structurally identical problems."""

    eq: np.ndarray
    ineq: np.ndarray
    penalty: float = 0.0
    omega: float = 0.0


@dataclass(frozen=True)
class NlpSolution:
    """Solver output.

    ``iterations`` counts inner quasi-Newton iterations summed over the
    outer loop.  status 'optimal' guarantees eq_residual_inf <= 1e-8,
    ineq_violation_inf <= 1e-8 and stationarity_inf <= 1e-6.
    """

    z: np.ndarray
    objective_value: float
    eq_residual_inf: float
    ineq_violation_inf: float
    stationarity_inf: float
    status: str  # optimal | feasible_suboptimal | infeasible | iteration_limit
    iterations: int
    eq_multipliers: np.ndarray
    ineq_multipliers: np.ndarray
    penalty: float = 0.0
    feas_history: tuple = ()
    trace: tuple = ()

    @property
    def feasibility_inf(self) -> float:
        return max(self.eq_residual_inf, self.ineq_violation_inf)


# ----------------------------------------------------------------------
# Augmented Lagrangian solver
# ----------------------------------------------------------------------


def _projected_grad_inf(z, g, lo, hi) -> float:
    if len(z) == 0:
        return 0.0
    return float(np.max(np.abs(z - np.clip(z - g, lo, hi))))


def _feasibility(c, g) -> float:
    ce = float(np.max(np.abs(c))) if c.size else 0.0
    gi = float(np.max(np.maximum(g, 0.0))) if g.size else 0.0
    return max(ce, gi)


class _StackedSide:
    """One constraint side pre-stacked for fast repeated evaluation.

    Affine blocks are merged into a single constant (M, b) pair, checked
    for finiteness once; nonlinear blocks keep their callables.  Row
    order matches the block order, so multiplier vectors are unchanged.
    """

    def __init__(self, blocks, nv):
        self.dim = sum(b.dim for b in blocks)
        self.nv = nv
        lin_rows, Ms, bs = [], [], []
        self.nonlinear = []  # (block, row_slice)
        off = 0
        for b in blocks:
            if isinstance(b, LinearBlock):
                lin_rows.extend(range(off, off + b.dim))
                Ms.append(b.M)
                bs.append(b.b)
            else:
                self.nonlinear.append((b, slice(off, off + b.dim)))
            off += b.dim
        self.lin_rows = np.array(lin_rows, dtype=np.intp)
        if Ms:
            self.M = np.vstack(Ms)
            self.b = np.concatenate(bs)
            if not (np.all(np.isfinite(self.M)) and np.all(np.isfinite(self.b))):
                raise NumericFailureError("linear blocks")
        else:
            self.M = np.zeros((0, nv))
            self.b = np.zeros(0)

    def values(self, z):
        vals = np.empty(self.dim)
        if self.lin_rows.size:
            vals[self.lin_rows] = self.M @ z + self.b
        nl_jacs = []
        for blk, sl in self.nonlinear:
            v, J = blk.fun(z)
            if not np.all(np.isfinite(v)):
                raise NumericFailureError(blk.label)
            vals[sl] = v
            nl_jacs.append((sl, J))
        return vals, nl_jacs

    def jac_t_dot(self, nl_jacs, w):
        out = np.zeros(self.nv)
        if self.lin_rows.size:
            out += self.M.T @ w[self.lin_rows]
        for sl, J in nl_jacs:
            out += J.T @ w[sl]
        return out


def solve(p: NlpProblem, z0, opts: SolverOptions | None = None,
          warm: MultiplierState | None = None) -> NlpSolution:
    """Minimize an NlpProblem with the method of multipliers.

    z0 is clipped into the variable bounds before starting.  If the
    clipped z0 is feasible (residuals <= 1e-8) the returned solution is
    never worse than it: a final candidate comparison falls back to z0
    when the solve ends infeasible or with a larger objective.
    """
    if opts is None:
        opts = SolverOptions()
    z0 = np.clip(np.asarray(z0, dtype=float), p.var_lo, p.var_hi)
    if z0.shape != (p.num_vars,):
        raise ValueError(f"z0 must have shape ({p.num_vars},)")

    eq_side = _StackedSide(p.eq_blocks, p.num_vars)
    in_side = _StackedSide(p.ineq_blocks, p.num_vars)

    nu = np.zeros(p.num_eq) if warm is None else np.array(warm.eq, dtype=float)
    eta = np.zeros(p.num_ineq) if warm is None else np.array(warm.ineq, dtype=float)
    mu = opts.penalty0 if (warm is None or warm.penalty <= 0) else warm.penalty
    mu = min(mu, 1e6)
    eta = np.maximum(eta, 0.0)
    omega0 = 1e-2 if (warm is None or warm.omega <= 0) else warm.omega

    f0, _ = p.eval_objective(z0)
    c0, _ = eq_side.values(z0)
    g0, _ = in_side.values(z0)
    z0_feasible = _feasibility(c0, g0) <= 1e-8

    bounds = list(zip(p.var_lo, p.var_hi))
    z = z0.copy()
    total_inner = 0
    feas_hist = []
    trace_lines = []
    feas_prev = np.inf
    f_prev = None
    stall = 0
    stagnant = 0
    status = "iteration_limit"
    omega = omega0

    def al_value_grad(zz):
        f, grad = p.eval_objective(zz)
        grad = grad.copy()
        val = f
        c, c_jacs = eq_side.values(zz)
        if c.size:
            val += float(nu @ c) + 0.5 * mu * float(c @ c)
            grad += eq_side.jac_t_dot(c_jacs, nu + mu * c)
        g, g_jacs = in_side.values(zz)
        if g.size:
            t = eta + mu * g
            np.maximum(t, 0.0, out=t)
            val += (float(t @ t) - float(eta @ eta)) / (2.0 * mu)
            grad += in_side.jac_t_dot(g_jacs, t)
        return val, grad

    for outer in range(opts.max_outer):
        res = minimize(
            al_value_grad, z, jac=True, method="L-BFGS-B", bounds=bounds,
            options={"maxiter": opts.max_inner, "gtol": omega,
                     "ftol": 1e-20, "maxcor": 12, "maxls": 40})
        z = np.clip(res.x, p.var_lo, p.var_hi)
        total_inner += int(res.nit)

        c, c_jacs = eq_side.values(z)
        g, g_jacs = in_side.values(z)
        nu = nu + mu * c
        eta = np.maximum(0.0, eta + mu * g)
        feas = _feasibility(c, g)
        feas_hist.append(feas)

        f, fgrad = p.eval_objective(z)
        lag_grad = fgrad + eq_side.jac_t_dot(c_jacs, nu) + \
            in_side.jac_t_dot(g_jacs, eta)
        stat = _projected_grad_inf(z, lag_grad, p.var_lo, p.var_hi)

        if opts.trace:
            trace_lines.append(
                f"outer={outer} penalty={mu:.3e} feas={feas:.3e} "
                f"stat={stat:.3e} inner={int(res.nit)} f={f:.9e}")

        if feas <= opts.feas_tol and stat <= opts.stat_tol:
            status = "optimal"
            break
        # Feasible but stationarity-stuck runs (active bounds, bilinear
        # rows) can grind for thousands of iterations while the objective
        # is frozen; stagnant near-feasible outers end the solve as
        # suboptimal once an outer actually meets the tolerance.
        if feas <= 10.0 * opts.feas_tol and f_prev is not None and \
                f_prev - f <= 1e-7 * max(1.0, abs(f)):
            stagnant += 1
            if stagnant >= 3 and feas <= opts.feas_tol:
                break
        else:
            stagnant = 0
        f_prev = f
        # At huge mu the update nu += mu*c turns float-level residuals
        # into multiplier noise, so grow the penalty only while
        # infeasible and shed it again once feasibility is met.
        if feas <= opts.feas_tol:
            mu = max(mu / opts.penalty_growth, opts.penalty0)
        elif feas > 0.25 * feas_prev:
            mu = min(mu * opts.penalty_growth, opts.penalty_cap)
        if mu >= opts.penalty_cap and feas > opts.feas_tol:
            stall = stall + 1 if feas > 0.99 * feas_prev else 0
            if stall >= 3:
                status = "infeasible"
                break
        feas_prev = feas
        omega = max(opts.stat_tol / 20.0, omega * 0.2)

    c, c_jacs = eq_side.values(z)
    g, g_jacs = in_side.values(z)
    eq_inf = float(np.max(np.abs(c))) if c.size else 0.0
    in_inf = float(np.max(np.maximum(g, 0.0))) if g.size else 0.0
    f, fgrad = p.eval_objective(z)
    feas = max(eq_inf, in_inf)
    if status not in ("optimal", "infeasible"):
        status = "feasible_suboptimal" if feas <= opts.feas_tol else "iteration_limit"

    # Suboptimal-MPC safeguard: never return worse than a feasible start.
    if z0_feasible and (feas > opts.feas_tol or f > f0):
        z = z0
        f = f0
        eq_inf = float(np.max(np.abs(c0))) if c0.size else 0.0
        in_inf = float(np.max(np.maximum(g0, 0.0))) if g0.size else 0.0
        status = "feasible_suboptimal"
        if opts.trace:
            trace_lines.append("fallback=warm-start (solver result discarded)")
        c, c_jacs = eq_side.values(z)
        g, g_jacs = in_side.values(z)
        fgrad = p.eval_objective(z)[1]

    lag_grad = fgrad + eq_side.jac_t_dot(c_jacs, nu) + \
        in_side.jac_t_dot(g_jacs, eta)
    stat = _projected_grad_inf(z, lag_grad, p.var_lo, p.var_hi)

    if opts.trace:
        trace_lines.append(
            f"final status={status} feas={max(eq_inf, in_inf):.3e} "
            f"stat={stat:.3e} penalty={mu:.3e} f={f:.9e}")
    return NlpSolution(z=z, objective_value=float(f), eq_residual_inf=eq_inf,
                       ineq_violation_inf=in_inf, stationarity_inf=stat,
                       status=status, iterations=total_inner,
                       eq_multipliers=nu, ineq_multipliers=eta, penalty=mu,
                       feas_history=tuple(feas_hist), trace=tuple(trace_lines))


def warm_state(sol: NlpSolution) -> MultiplierState:
    """Multiplier state for warm-starting the next, structurally identical solve.

    Multipliers carry over; the penalty restarts (a carried-over stiff
    penalty makes the first subproblem needlessly hard) and the inner
    tolerance starts one notch tighter than a cold solve.
    """
    return MultiplierState(sol.eq_multipliers.copy(),
                           sol.ineq_multipliers.copy(), 0.0, 1e-3)


# ----------------------------------------------------------------------
# Independent residual / derivative checks
# ----------------------------------------------------------------------


@dataclass(frozen=True)
class KktBlockRow:
    label: str
    kind: str  # "eq" | "ineq"
    max_residual: float
    min_multiplier: float
    max_complementarity: float
    violations: tuple = ()


@dataclass(frozen=True)
class KktReport:
    rows: tuple
    stationarity_inf: float
    multiplier_sign_ok: bool
    complementarity_ok: bool

    def format(self) -> str:
        lines = [f"{'block':<28} {'kind':<5} {'residual':>12} {'min mult':>12} "
                 f"{'compl':>12}"]
        for r in self.rows:
            lines.append(f"{r.label:<28} {r.kind:<5} {r.max_residual:>12.3e} "
                         f"{r.min_multiplier:>12.3e} {r.max_complementarity:>12.3e}")
        lines.append(f"stationarity_inf = {self.stationarity_inf:.3e}")
        return "\n".join(lines)


def kkt_report(p: NlpProblem, sol: NlpSolution,
               active_tol: float = 1e-6) -> KktReport:
    """Recompute all KKT residuals from scratch, independent of the solver."""
    z = sol.z
    rows = []
    sign_ok = True
    compl_ok = True
    off = 0
    for b in p.eq_blocks:
        vals, _ = b.eval(z)
        mult = sol.eq_multipliers[off:off + b.dim]
        mmin = float(mult.min()) if b.dim else 0.0
        rows.append(KktBlockRow(b.label, "eq", float(np.max(np.abs(vals))) if b.dim else 0.0,
                                mmin, 0.0))
        off += b.dim
    off = 0
    for b in p.ineq_blocks:
        vals, _ = b.eval(z)
        mult = sol.ineq_multipliers[off:off + b.dim]
        compl = np.abs(mult * vals)
        viol = tuple(b.row_labels[i] for i in range(b.dim)
                     if compl[i] > active_tol and vals[i] < -active_tol)
        mmin = float(mult.min()) if b.dim else 0.0
        if mmin < -1e-8:
            sign_ok = False
        if viol:
            compl_ok = False
        rows.append(KktBlockRow(b.label, "ineq",
                                float(np.max(np.maximum(vals, 0.0))) if b.dim else 0.0,
                                mmin, float(compl.max()) if b.dim else 0.0, viol))
        off += b.dim
    grad = p.eval_objective(z)[1].copy()
    if p.num_eq:
        _, Jc = p.eval_eq(z)
        grad += Jc.T @ sol.eq_multipliers
    if p.num_ineq:
        _, Jg = p.eval_ineq(z)
        grad += Jg.T @ sol.ineq_multipliers
    stat = _projected_grad_inf(z, grad, p.var_lo, p.var_hi)
    return KktReport(tuple(rows), stat, sign_ok, compl_ok)


@dataclass(frozen=True)
class GradCheckResult:
    max_rel_error: float
    worst_label: str
    per_block: dict = field(default_factory=dict)


def grad_check(p: NlpProblem, z, h: float = 1e-6) -> GradCheckResult:
    """Central-difference check of every supplied gradient/Jacobian at z.

    Relative error per entry is |fd - analytic| / max(1, |analytic|);
    returns the worst error and the offending block label.
    """
    z = np.asarray(z, dtype=float)
    names = ["objective"] + [b.label for b in p.eq_blocks] + \
            [b.label for b in p.ineq_blocks]

    def stacked(zz):
        out = [np.atleast_1d(p.objective(zz)[0])]
        for b in list(p.eq_blocks) + list(p.ineq_blocks):
            out.append(b.eval(zz)[0])
        return np.concatenate(out)

    f0, g0 = p.eval_objective(z)
    jacs = [g0.reshape(1, -1)]
    sizes = [1]
    for b in list(p.eq_blocks) + list(p.ineq_blocks):
        _, J = b.eval(z)
        jacs.append(J)
        sizes.append(b.dim)
    analytic = np.vstack(jacs)

    fd = np.empty_like(analytic)
    for i in range(p.num_vars):
        zp = z.copy()
        zm = z.copy()
        zp[i] += h
        zm[i] -= h
        fd[:, i] = (stacked(zp) - stacked(zm)) / (2.0 * h)

    rel = np.abs(fd - analytic) / np.maximum(1.0, np.abs(analytic))
    per_block = {}
    row = 0
    worst = 0.0
    worst_label = names[0]
    for name, sz in zip(names, sizes):
        err = float(rel[row:row + sz].max()) if sz else 0.0
        per_block[name] = max(per_block.get(name, 0.0), err)
        if err > worst:
            worst = err
            worst_label = name
        row += sz
    return GradCheckResult(worst, worst_label, per_block)
