"""Plant dynamics, constraint sets, stage costs, and the optimal steady state.

Plants are discrete-time linear maps ``x+ = A x + B u`` (the named
"rotator" expands to one); stage costs are polynomials in (x, u) or the
built-in nonsmooth ``|x1*x2|``.  Everything here is immutable after
construction and all operations are pure.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from empc import kernels, nlp
from empc.errors import InfeasibleProblemError, NotPeriodicError


def _frozen(a, dtype=float) -> np.ndarray:
    out = np.array(a, dtype=dtype)
    out.flags.writeable = False
    return out


# ----------------------------------------------------------------------
# System model
# ----------------------------------------------------------------------


@dataclass(frozen=True)
class SystemModel:
    """Discrete-time plant ``x+ = A x + B u`` with dimensions (n, m)."""

    n: int
    m: int
    kind: str
    A: np.ndarray
    B: np.ndarray

    def __post_init__(self):
        if self.A.shape != (self.n, self.n):
            raise ValueError(f"A must be {(self.n, self.n)}, got {self.A.shape}")
        if self.B.shape != (self.n, self.m):
            raise ValueError(f"B must be {(self.n, self.m)}, got {self.B.shape}")

    @staticmethod
    def linear(A, B) -> "SystemModel":
        A = _frozen(A)
        B = _frozen(B)
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise ValueError("A must be square")
        if B.ndim != 2 or B.shape[0] != A.shape[0]:
            raise ValueError("B row count must match A")
        return SystemModel(A.shape[0], B.shape[1], "linear", A, B)

    @staticmethod
    def rotator() -> "SystemModel":
        """Planar rotation plant: A = [[0,1],[-1,0]], B = [[1],[0]]."""
        sys = SystemModel.linear([[0.0, 1.0], [-1.0, 0.0]], [[1.0], [0.0]])
        object.__setattr__(sys, "kind", "rotator")
        return sys


def step(sys: SystemModel, x, u) -> np.ndarray:
    """One plant step ``f(x, u)``."""
    x = np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float)
    if x.shape != (sys.n,):
        raise ValueError(f"state must have shape ({sys.n},), got {x.shape}")
    if u.shape != (sys.m,):
        raise ValueError(f"input must have shape ({sys.m},), got {u.shape}")
    return sys.A @ x + sys.B @ u


# ----------------------------------------------------------------------
# Constraint set Z
# ----------------------------------------------------------------------


@dataclass(frozen=True)
class ConstraintSet:
    """Compact state/input constraint set Z.

    States are box-bounded.  Inputs are either box-bounded or coupled
    affinely to the state: ``u_j in [c_lo_j + d_lo_j . x, c_hi_j + d_hi_j . x]``.
    Residual convention: one scalar per bound, membership iff all <= 0.
    """

    state_lo: np.ndarray
    state_hi: np.ndarray
    input_mode: str  # "box" | "coupled"
    input_lo: np.ndarray | None = None
    input_hi: np.ndarray | None = None
    c_lo: np.ndarray | None = None
    c_hi: np.ndarray | None = None
    d_lo: np.ndarray | None = None
    d_hi: np.ndarray | None = None

    def __post_init__(self):
        for a in (self.state_lo, self.state_hi, self.input_lo, self.input_hi,
                  self.c_lo, self.c_hi, self.d_lo, self.d_hi):
            if a is not None and not np.all(np.isfinite(a)):
                raise ValueError("Z must be compact: all bounds finite")
        if np.any(self.state_lo > self.state_hi):
            raise ValueError("state_lo must be <= state_hi")
        if self.input_mode == "box" and np.any(self.input_lo > self.input_hi):
            raise ValueError("input_lo must be <= input_hi")

    @staticmethod
    def box(state_lo, state_hi, input_lo, input_hi) -> "ConstraintSet":
        return ConstraintSet(_frozen(state_lo), _frozen(state_hi), "box",
                             input_lo=_frozen(input_lo), input_hi=_frozen(input_hi))

    @staticmethod
    def coupled(state_lo, state_hi, c_lo, d_lo, c_hi, d_hi) -> "ConstraintSet":
        return ConstraintSet(_frozen(state_lo), _frozen(state_hi), "coupled",
                             c_lo=_frozen(np.atleast_1d(c_lo)),
                             c_hi=_frozen(np.atleast_1d(c_hi)),
                             d_lo=_frozen(np.atleast_2d(d_lo)),
                             d_hi=_frozen(np.atleast_2d(d_hi)))

    @property
    def n(self) -> int:
        return self.state_lo.shape[0]

    @property
    def m(self) -> int:
        if self.input_mode == "box":
            return self.input_lo.shape[0]
        return self.c_lo.shape[0]

    def affine_rows(self):
        """Z as stacked affine rows: residual = Gx x + Gu u + h, one per bound.

        Row order (stable): x - hi, lo - x, then per input j the upper and
        lower bound rows.  Returns (Gx, Gu, h, labels).
        """
        n, m = self.n, self.m
        r = 2 * n + 2 * m
        Gx = np.zeros((r, n))
        Gu = np.zeros((r, m))
        h = np.zeros(r)
        labels = []
        Gx[:n] = np.eye(n)
        h[:n] = -self.state_hi
        labels += [f"x[{i}] upper" for i in range(n)]
        Gx[n:2 * n] = -np.eye(n)
        h[n:2 * n] = self.state_lo
        labels += [f"x[{i}] lower" for i in range(n)]
        for j in range(m):
            up = 2 * n + 2 * j
            if self.input_mode == "box":
                Gu[up, j] = 1.0
                h[up] = -self.input_hi[j]
                Gu[up + 1, j] = -1.0
                h[up + 1] = self.input_lo[j]
            else:
                Gu[up, j] = 1.0
                Gx[up] = -self.d_hi[j]
                h[up] = -self.c_hi[j]
                Gu[up + 1, j] = -1.0
                Gx[up + 1] = self.d_lo[j]
                h[up + 1] = self.c_lo[j]
            labels += [f"u[{j}] upper", f"u[{j}] lower"]
        return Gx, Gu, h, labels


def constraint_residuals(z: ConstraintSet, x, u) -> np.ndarray:
    """Residual vector of Z at (x, u); membership iff max residual <= 0."""
    x = np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float)
    if x.shape != (z.n,) or u.shape != (z.m,):
        raise ValueError("dimension mismatch with constraint set")
    Gx, Gu, h, _ = z.affine_rows()
    return Gx @ x + Gu @ u + h


# ----------------------------------------------------------------------
# Stage cost
# ----------------------------------------------------------------------


@dataclass(frozen=True)
class StageCost:
    """Economic stage cost; polynomial terms or the nonsmooth |x1*x2|.

    Polynomial terms are rows of state/input exponents with a coefficient,
    so gradients are exact.  The |x1*x2| gradient uses the subgradient
    convention 0 on the kink.
    """

    kind: str
    kind_id: int
    n: int
    m: int
    ex: np.ndarray = field(repr=False)  # (q, n) int exponents
    eu: np.ndarray = field(repr=False)  # (q, m) int exponents
    coef: np.ndarray = field(repr=False)  # (q,)

    @staticmethod
    def polynomial(terms, n: int, m: int) -> "StageCost":
        """Build from (state_exponents, input_exponents, coefficient) triples."""
        q = len(terms)
        ex = np.zeros((q, n), dtype=np.int64)
        eu = np.zeros((q, m), dtype=np.int64)
        coef = np.zeros(q)
        for i, (e_x, e_u, c) in enumerate(terms):
            ex[i] = e_x
            eu[i] = e_u
            coef[i] = c
        return StageCost("polynomial", kernels.COST_POLY, n, m,
                         _frozen(ex, np.int64), _frozen(eu, np.int64), _frozen(coef))

    @staticmethod
    def quartic() -> "StageCost":
        """u^2 + x1^4 - 0.5*x1^2 on a two-state, one-input plant."""
        c = StageCost.polynomial(
            [((0, 0), (2,), 1.0), ((4, 0), (0,), 1.0), ((2, 0), (0,), -0.5)], 2, 1)
        object.__setattr__(c, "kind", "quartic")
        return c

    @staticmethod
    def absxy() -> "StageCost":
        """|x1*x2| on a two-state, one-input plant."""
        return StageCost("absxy", kernels.COST_ABSXY, 2, 1,
                         _frozen(np.zeros((0, 2)), np.int64),
                         _frozen(np.zeros((0, 1)), np.int64),
                         _frozen(np.zeros(0)))

    def eval(self, x, u) -> float:
        l, _, _ = kernels.stage_cost_batch(
            self.kind_id, self.ex, self.eu, self.coef,
            np.asarray(x, dtype=float).reshape(1, self.n),
            np.asarray(u, dtype=float).reshape(1, self.m))
        return float(l[0])

    def gradient(self, x, u):
        """Returns (dl/dx, dl/du)."""
        _, lx, lu = kernels.stage_cost_batch(
            self.kind_id, self.ex, self.eu, self.coef,
            np.asarray(x, dtype=float).reshape(1, self.n),
            np.asarray(u, dtype=float).reshape(1, self.m))
        return lx[0], lu[0]


# ----------------------------------------------------------------------
# Optimal steady state
# ----------------------------------------------------------------------


@dataclass(frozen=True)
class SteadyState:
    """Optimal feasible steady state: xs, us, and ls = l(xs, us)."""

    xs: np.ndarray
    us: np.ndarray
    ls: float

    def check(self, sys: SystemModel, cost: StageCost, z: ConstraintSet,
              tol: float = 1e-8) -> None:
        """Re-verify the defining invariants, independent of any solver."""
        if np.max(np.abs(step(sys, self.xs, self.us) - self.xs)) > tol:
            raise InfeasibleProblemError("steady state does not satisfy x = f(x,u)")
        if np.max(constraint_residuals(z, self.xs, self.us)) > tol:
            raise InfeasibleProblemError("steady state violates Z")
        if abs(cost.eval(self.xs, self.us) - self.ls) > max(tol, 1e-12 * abs(self.ls)):
            raise InfeasibleProblemError("steady-state cost mismatch")


def _steady_state_problem(sys: SystemModel, cost: StageCost,
                          z: ConstraintSet) -> nlp.NlpProblem:
    n, m = sys.n, sys.m
    nv = n + m

    def objective(w):
        l, lx, lu = kernels.stage_cost_batch(
            cost.kind_id, cost.ex, cost.eu, cost.coef,
            w[:n].reshape(1, n), w[n:].reshape(1, m))
        return float(l[0]), np.concatenate([lx[0], lu[0]])

    M_eq = np.hstack([np.eye(n) - sys.A, -sys.B])
    eq = nlp.LinearBlock("steady-state", M_eq, np.zeros(n),
                         [f"x[{i}] = f(x,u)[{i}]" for i in range(n)])
    Gx, Gu, h, labels = z.affine_rows()
    ineq = nlp.LinearBlock("Z", np.hstack([Gx, Gu]), h, labels)

    lo = np.concatenate([z.state_lo, np.full(m, -np.inf)])
    hi = np.concatenate([z.state_hi, np.full(m, np.inf)])
    if z.input_mode == "box":
        lo[n:] = z.input_lo
        hi[n:] = z.input_hi
    return nlp.NlpProblem(nv, lo, hi, objective, (eq,), (ineq,))


def solve_steady_state(sys: SystemModel, cost: StageCost, z: ConstraintSet,
                       opts: nlp.SolverOptions | None = None) -> SteadyState:
    """Best local solution of min l(x,u) over {x = f(x,u)} within Z.

    Multi-started from a uniform grid of 5 points per state dimension
    (u started at zero); the best feasible local solution wins.
    Uniqueness is not verified.
    """
    if opts is None:
        opts = nlp.SolverOptions(feas_tol=1e-10)
    prob = _steady_state_problem(sys, cost, z)
    axes = [np.linspace(z.state_lo[i], z.state_hi[i], 5) for i in range(sys.n)]
    grids = np.meshgrid(*axes, indexing="ij")
    starts = np.stack([g.ravel() for g in grids], axis=1)

    best = None
    for x0 in starts:
        w0 = np.concatenate([x0, np.zeros(sys.m)])
        sol = nlp.solve(prob, w0, opts)
        if sol.status not in ("optimal", "feasible_suboptimal"):
            continue
        cand = SteadyState(_frozen(sol.z[:sys.n]), _frozen(sol.z[sys.n:]),
                           sol.objective_value)
        try:
            cand.check(sys, cost, z)
        except InfeasibleProblemError:
            continue
        if best is None or cand.ls < best.ls:
            best = cand
    if best is None:
        raise InfeasibleProblemError("no feasible steady state found")
    return best


def orbit_average_cost(sys: SystemModel, cost: StageCost, x0, period: int,
                       tol: float = 1e-9) -> float:
    """Mean stage cost over the zero-input orbit of length ``period``.

    A strictly-negative value certifies, via the average-performance
    implication of dissipativity, that no storage function can make the
    system dissipative w.r.t. the optimal equilibrium.
    """
    if period < 1:
        raise ValueError("period must be >= 1")
    x = np.asarray(x0, dtype=float)
    u0 = np.zeros(sys.m)
    total = 0.0
    pt = x
    for _ in range(period):
        total += cost.eval(pt, u0)
        pt = step(sys, pt, u0)
    if np.max(np.abs(pt - x)) > tol:
        raise NotPeriodicError(
            f"zero-input orbit from {x0} does not close after {period} steps")
    return total / period
