"""Closed-loop receding-horizon execution with full logging.

Each step stacks the per-step problem at the measured state and carried
parameter vector, solves it from the shifted warm start (zero-input
rollout at t = 0, with a feasibility-phase fallback), applies the first
input, and carries theta*_{t+1|t} to the next step.  The log is
dynamically consistent: x_{t+1} is the exact plant step, never the
solver's prediction.
"""

from __future__ import annotations

import csv
import sys
from dataclasses import dataclass, field

import numpy as np

from empc import diagnostics, nlp
from empc.errors import SimulationError
from empc.model import step
from empc.ocp import (ExperimentConfig, OcpSolutionTriple, build_ocp,
                      cold_start, feasibility_phase, layout, shift_warm_start,
                      validate_candidate)
from empc.storage import dissipation_residual, storage_eval

TRAJECTORY_COLUMNS_DOC = (
    "t, x0..x{n-1}, u0..u{m-1}, stage_cost, running_avg, "
    "theta_0..theta_{p-1}, value, rotated_value, max_diss_residual, "
    "warmstart_margin, solver_status, solver_iters")


@dataclass
class ClosedLoopLog:
    """Time-indexed record of one closed-loop run.

    ``states`` has one extra row: the final state after the last applied
    input.  ``triples`` retains the accepted per-step solutions so the
    diagnostics can recompute everything without solver state.
    """

    config_hash: str
    steady: object
    states: np.ndarray  # (T+1, n)
    inputs: np.ndarray  # (T, m)
    applied_theta: np.ndarray  # (T, p)
    carried_theta: np.ndarray  # (T, p)
    stage_costs: np.ndarray  # (T,)
    running_avg: np.ndarray  # (T,)
    values: np.ndarray  # (T,)
    rotated_values: np.ndarray  # (T,) telescoped V-bar
    rotated_direct: np.ndarray  # (T,) direct V-bar (identity cross-check)
    max_diss_residual: np.ndarray  # (T,)
    warmstart_margin: np.ndarray  # (T,)
    warmstart_feasible: np.ndarray  # (T,) bool; index 0 is the cold start
    solver_status: list
    solver_iters: np.ndarray  # (T,) int
    triples: list
    violations: list = field(default_factory=list)

    @property
    def T(self) -> int:
        return self.inputs.shape[0]


COLD_START_IMPULSES = (0.0, 0.25, -0.25)


def _solve_cold(cfg, prob, lay, x, theta):
    """First-step solve, multi-started from the zero-input rollout and two
    impulse variants; at an equilibrium start the plain rollout is an
    exact stationary point, so the variants are what let the solver find
    the profitable departures when they exist.  Deterministic."""
    best = None
    report0 = None
    for impulse in COLD_START_IMPULSES:
        cand = cold_start(cfg, x, theta, impulse)
        report = validate_candidate(cand, cfg, x, theta)
        if impulse == 0.0:
            report0 = report
        z0 = lay.pack(cand)
        warm_value = cand.value if report.feasible else None
        if not report.feasible:
            feas_sol = nlp.solve(feasibility_phase(prob), z0, cfg.solver)
            if feas_sol.feasibility_inf <= cfg.solver.feas_tol:
                z0 = feas_sol.z
        sol = nlp.solve(prob, z0, cfg.solver)
        acceptable = sol.status == "optimal" or (
            sol.status == "feasible_suboptimal"
            and (warm_value is None or sol.objective_value <= warm_value + 1e-9))
        if acceptable and (best is None
                           or sol.objective_value < best.objective_value):
            best = sol
    if best is None:
        raise SimulationError(0, "no cold-start variant produced an "
                                 "acceptable solution")
    return best, report0


def run_closed_loop(cfg: ExperimentConfig) -> ClosedLoopLog:
    """Execute the receding-horizon loop for cfg.sim_steps steps."""
    from empc.config import config_hash

    lay = layout(cfg)
    T, N = cfg.sim_steps, cfg.horizon
    n, m, p = lay.n, lay.m, lay.p
    fam, steady = cfg.storage, cfg.steady

    x = cfg.x0.astype(float).copy()
    theta = fam.apply_pins(np.clip(cfg.theta0, fam.theta_lo, fam.theta_hi))

    log = ClosedLoopLog(
        config_hash=config_hash(cfg), steady=steady,
        states=np.zeros((T + 1, n)), inputs=np.zeros((T, m)),
        applied_theta=np.zeros((T, p)), carried_theta=np.zeros((T, p)),
        stage_costs=np.zeros(T), running_avg=np.zeros(T), values=np.zeros(T),
        rotated_values=np.zeros(T), rotated_direct=np.zeros(T),
        max_diss_residual=np.zeros(T), warmstart_margin=np.zeros(T),
        warmstart_feasible=np.zeros(T, dtype=bool), solver_status=[],
        solver_iters=np.zeros(T, dtype=int), triples=[])

    prev: OcpSolutionTriple | None = None
    warm_mult: nlp.MultiplierState | None = None
    cost_sum = 0.0

    for t in range(T):
        prob = build_ocp(cfg, x, theta)
        if t == 0:
            sol, report = _solve_cold(cfg, prob, lay, x, theta)
        else:
            cand = shift_warm_start(prev, cfg)
            report = validate_candidate(cand, cfg, x, theta)
            warm_value = cand.value if report.feasible else None
            if not report.feasible:
                log.violations.append(
                    f"warm start infeasible at t={t}: {report.worst_block} "
                    f"residual {report.max_residual:.3e}")
            sol = nlp.solve(prob, lay.pack(cand), cfg.solver,
                            warm=warm_mult if cfg.warm_multipliers else None)
            accepted = sol.status == "optimal" or (
                sol.status == "feasible_suboptimal"
                and (warm_value is None
                     or sol.objective_value <= warm_value + 1e-9))
            if not accepted:
                raise SimulationError(
                    t, f"solver returned {sol.status} "
                       f"(feasibility {sol.feasibility_inf:.3e})")
        if cfg.solver.trace:
            for line in sol.trace:
                print(f"[t={t}] {line}", file=sys.stderr)
        if cfg.warm_multipliers:
            warm_mult = nlp.warm_state(sol)

        triple = lay.unpack(sol.z, sol.objective_value)
        u = triple.u_seq[0].copy()
        stage = cfg.cost.eval(x, u)
        cost_sum += stage

        diss = max(
            dissipation_residual(fam, cfg.rho, cfg.cost, steady,
                                 triple.theta_seq[k], triple.theta_seq[k + 1],
                                 triple.x_seq[k], triple.u_seq[k],
                                 triple.x_seq[k + 1])
            for k in range(N))
        vbar = sol.objective_value - N * steady.ls + \
            storage_eval(fam, triple.theta_seq[0], x)
        vbar_dir = diagnostics.rotated_value_direct(triple, cfg)

        log.states[t] = x
        log.inputs[t] = u
        log.applied_theta[t] = triple.theta_seq[0]
        log.carried_theta[t] = triple.theta_seq[1]
        log.stage_costs[t] = stage
        log.running_avg[t] = cost_sum / (t + 1)
        log.values[t] = sol.objective_value
        log.rotated_values[t] = vbar
        log.rotated_direct[t] = vbar_dir
        log.max_diss_residual[t] = diss
        log.warmstart_margin[t] = report.max_residual
        log.warmstart_feasible[t] = report.feasible
        log.solver_status.append(sol.status)
        log.solver_iters[t] = sol.iterations
        log.triples.append(triple)

        x = step(cfg.system, x, u)
        theta = fam.apply_pins(
            np.clip(triple.theta_seq[1], fam.theta_lo, fam.theta_hi))
        prev = triple

    log.states[T] = x
    return log


def convergence_time(log: ClosedLoopLog, tol: float) -> int | None:
    """Smallest t with |x_s - xs| <= tol for every s >= t; None if never."""
    if tol <= 0:
        raise ValueError("tolerance must be positive")
    dev = np.max(np.abs(log.states - log.steady.xs[None, :]), axis=1)
    bad = np.nonzero(dev > tol)[0]
    if bad.size == 0:
        return 0
    t = int(bad[-1]) + 1
    return t if t < log.states.shape[0] else None


def transient_average(log: ClosedLoopLog, horizon: int) -> float:
    """Mean of the first ``horizon`` closed-loop stage costs."""
    if horizon > log.T:
        raise ValueError("averaging horizon exceeds the log length")
    return float(np.mean(log.stage_costs[:horizon]))


def _f(v) -> str:
    # repr(float) is the shortest round-trip decimal in Python 3.
    return repr(float(v))


def write_trajectory_csv(log: ClosedLoopLog, path) -> None:
    """Write the per-step log with shortest round-trip float formatting."""
    n = log.states.shape[1]
    m = log.inputs.shape[1]
    p = log.applied_theta.shape[1]
    header = (["t"] + [f"x{i}" for i in range(n)] + [f"u{i}" for i in range(m)]
              + ["stage_cost", "running_avg"]
              + [f"theta_{i}" for i in range(p)]
              + ["value", "rotated_value", "max_diss_residual",
                 "warmstart_margin", "solver_status", "solver_iters"])
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for t in range(log.T):
            row = ([str(t)] + [_f(v) for v in log.states[t]]
                   + [_f(v) for v in log.inputs[t]]
                   + [_f(log.stage_costs[t]), _f(log.running_avg[t])]
                   + [_f(v) for v in log.applied_theta[t]]
                   + [_f(log.values[t]), _f(log.rotated_values[t]),
                      _f(log.max_diss_residual[t]),
                      _f(log.warmstart_margin[t]),
                      log.solver_status[t], str(int(log.solver_iters[t]))])
            w.writerow(row)
