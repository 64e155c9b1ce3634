"""Runtime verification of the closed-loop guarantees.

Everything here recomputes its quantities from a finished log plus the
configuration; no solver state is consulted.  Each check is tolerance-
gated and reports the assumption set it relies on, so a failure
distinguishes "assumption unmet" from "bug".

Standing assumptions, numbered consistently with ``empc verify`` output:
  1  the storage-parameter box is compact
  2  the storage function is continuous
  3  the plant/cost pair is strictly controlled dissipative
  4  the terminal region is invariant under the terminal policy, which
     keeps (x, u) admissible and decreases the terminal penalty by at
     least the stage-cost excess
  5  the dissipation inequality admits a parameter witness under the
     terminal policy everywhere on the terminal region
  6  the storage function vanishes at the optimal equilibrium for every
     admissible parameter vector
1 and 2 hold by construction of StorageFamily; 3 is witnessed pointwise
by solver feasibility; 4 and 5 are sample-checked; 6 is structural.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np

from empc import nlp
from empc.model import StageCost, SteadyState, SystemModel, step
from empc.ocp import (ExperimentConfig, OcpSolutionTriple, build_ocp, layout,
                      resolve_terminal, sample_terminal_region,
                      terminal_policy_rollout, validate_candidate)
from empc.storage import StorageFamily, assumption6_structural, storage_eval

if TYPE_CHECKING:
    from empc.simulate import ClosedLoopLog


def rotated_stage(fam: StorageFamily, cost: StageCost, steady: SteadyState,
                  sys: SystemModel, theta, theta_plus, x, u) -> float:
    """Rotated stage cost l(x,u) + lam(theta,x) - lam(theta+,f(x,u)) - ls.

    Nonnegative (>= rho(x - xs)) wherever the strict dissipation residual
    is <= 0; the two quantities sum to rho(x - xs) identically.
    """
    xn = step(sys, np.asarray(x, dtype=float), np.asarray(u, dtype=float))
    return (cost.eval(x, u) + storage_eval(fam, theta, x)
            - storage_eval(fam, theta_plus, xn) - steady.ls)


def rotated_value_direct(triple: OcpSolutionTriple, cfg: ExperimentConfig) -> float:
    """V-bar by summing rotated stages plus the rotated terminal cost."""
    res = resolve_terminal(cfg.terminal, cfg.steady, cfg.system.n, cfg.system.m)
    N = triple.u_seq.shape[0]
    total = 0.0
    for k in range(N):
        total += rotated_stage(cfg.storage, cfg.cost, cfg.steady, cfg.system,
                               triple.theta_seq[k], triple.theta_seq[k + 1],
                               triple.x_seq[k], triple.u_seq[k])
    xN = triple.x_seq[N]
    total += res.penalty(xN) + storage_eval(cfg.storage, triple.theta_seq[N], xN)
    return total


def rotated_value(triple: OcpSolutionTriple, cfg: ExperimentConfig,
                  x_t, flag_tol: float = 1e-6):
    """Telescoped V-bar plus the identity cross-check against the direct sum.

    Returns (vbar, mismatch, flagged): the telescoping identity ties the
    two evaluations to within solver residuals; a mismatch beyond
    ``flag_tol`` indicates the initial-parameter constraint is not being
    enforced or a logging bug.
    """
    vbar = (triple.value - triple.u_seq.shape[0] * cfg.steady.ls
            + storage_eval(cfg.storage, triple.theta_seq[0], x_t))
    direct = rotated_value_direct(triple, cfg)
    mismatch = abs(vbar - direct)
    return vbar, mismatch, mismatch > flag_tol


# ----------------------------------------------------------------------
# Theorem-level checks
# ----------------------------------------------------------------------


def verify_theorem1(log: "ClosedLoopLog", cfg: ExperimentConfig,
                    tol: float = 1e-6) -> dict:
    """Descent of the rotated value by at least rho(x - xs) per step, and a
    summability look at rho along the run (tail of the last 20% <= 5%)."""
    vbar = log.rotated_values
    rho_vals = np.array([cfg.rho.eval(log.states[t] - cfg.steady.xs)
                         for t in range(log.T)])
    diffs = vbar[1:] - vbar[:-1] + rho_vals[:-1]
    worst = float(diffs.max()) if diffs.size else 0.0
    worst_step = int(diffs.argmax()) + 1 if diffs.size else 0
    tail_start = int(np.floor(0.8 * log.T))
    total = float(rho_vals.sum())
    tail = float(rho_vals[tail_start:].sum())
    tail_ok = tail <= 0.05 * total + 1e-12
    return {
        "descent_ok": bool(worst <= tol),
        "worst_descent_violation": worst,
        "worst_step": worst_step,
        "vbar_monotone": bool((vbar[1:] - vbar[:-1]).max(initial=-np.inf) <= tol),
        "worst_vbar_increase": float((vbar[1:] - vbar[:-1]).max(initial=0.0)),
        "rho_total": total,
        "rho_tail_fraction": tail / total if total > 0 else 0.0,
        "tail_ok": bool(tail_ok),
        "assumes": "assumptions 1-5 (compact box, continuity, controlled "
                   "dissipativity, terminal ingredients)",
    }


def verify_theorem2(log: "ClosedLoopLog", cfg: ExperimentConfig) -> dict:
    """Asymptotic average-performance bound with a transient allowance."""
    eps = 10.0 * cfg.solver.stat_tol + 2.0 * abs(log.values[0]) / log.T
    final_avg = float(log.running_avg[-1])
    return {
        "final_running_avg": final_avg,
        "steady_cost": cfg.steady.ls,
        "epsilon": eps,
        "bound_ok": bool(final_avg <= cfg.steady.ls + eps),
        "avg_bound_margin": cfg.steady.ls - final_avg,
        "assumes": "assumptions 1, 2, 4, 5; holds even when the "
                   "convergence-enforcing strictness is absent",
    }


def verify_corollary1(log: "ClosedLoopLog", cfg: ExperimentConfig,
                      probes: int = 12, seed: int = 0,
                      tol: float = 1e-6) -> dict:
    """Lyapunov bounds on the rotated value.

    Lower bound at every visited step; upper bound locally on the terminal
    region via fresh probe solves warm-started from the terminal-policy
    rollout.  Requires region mode and the structural lam(theta, xs) = 0
    condition; otherwise reported as not applicable.
    """
    applicable = (cfg.terminal.mode == "region"
                  and assumption6_structural(cfg.storage, cfg.steady.xs))
    out = {"applicable": bool(applicable),
           "assumes": "assumptions 1-6; the upper bound is checked locally "
                      "on the terminal region only"}
    if not applicable:
        out.update(lower_ok=None, upper_ok=None)
        return out

    rho_vals = np.array([cfg.rho.eval(log.states[t] - cfg.steady.xs)
                         for t in range(log.T)])
    lower_margin = log.rotated_values - rho_vals
    out["lower_ok"] = bool(lower_margin.min() >= -tol)
    out["lower_worst"] = float(lower_margin.min())

    res = resolve_terminal(cfg.terminal, cfg.steady, cfg.system.n, cfg.system.m)
    rng = np.random.default_rng(seed)
    pts = sample_terminal_region(res, probes, rng)[:max(probes, 1)]
    lay = layout(cfg)
    skipped = 0
    upper_worst = -np.inf
    checked = 0
    for i, x in enumerate(pts):
        theta = log.applied_theta[i % log.T]
        cand = terminal_policy_rollout(cfg, x, theta)
        report = validate_candidate(cand, cfg, x, theta)
        if not report.feasible:
            skipped += 1
            continue
        prob = build_ocp(cfg, x, theta)
        sol = nlp.solve(prob, lay.pack(cand), cfg.solver)
        if sol.status not in ("optimal", "feasible_suboptimal"):
            skipped += 1
            continue
        vbar = (sol.objective_value - cfg.horizon * cfg.steady.ls
                + storage_eval(cfg.storage, theta, x))
        vbar_f = res.penalty(x) + storage_eval(cfg.storage, theta, x)
        upper_worst = max(upper_worst, vbar - vbar_f)
        checked += 1
    out["upper_ok"] = bool(checked > 0 and upper_worst <= tol)
    out["upper_worst"] = float(upper_worst) if checked else None
    out["probes_checked"] = checked
    out["probes_skipped"] = skipped
    return out


# ----------------------------------------------------------------------
# Assembled report
# ----------------------------------------------------------------------


@dataclass(frozen=True)
class DiagnosticsReport:
    """Re-computed verdicts for one run; see the section dicts for detail."""

    vbar_series: np.ndarray
    vbar_monotone: bool
    worst_vbar_increase: float
    avg_bound_margin: float
    dissipation_ok: bool
    lyapunov_lower_ok: bool | None
    lyapunov_upper_ok: bool | None
    prop1_ok: bool
    identity_ok: bool
    identity_worst: float
    theorem1: dict
    theorem2: dict
    corollary1: dict

    def violations(self) -> list:
        """Names of every gated check that failed (None = not applicable)."""
        out = []
        if not self.theorem1["descent_ok"]:
            out.append("theorem1 descent")
        if not self.theorem2["bound_ok"]:
            out.append("theorem2 average bound")
        if self.lyapunov_lower_ok is False:
            out.append("corollary1 lower bound")
        if self.lyapunov_upper_ok is False:
            out.append("corollary1 upper bound")
        if not self.dissipation_ok:
            out.append("dissipation residuals")
        if not self.prop1_ok:
            out.append("recursive feasibility")
        if not self.identity_ok:
            out.append("rotated-value identity")
        return out

    def to_dict(self) -> dict:
        d = {
            "vbar_series": [float(v) for v in self.vbar_series],
            "vbar_monotone": self.vbar_monotone,
            "worst_vbar_increase": self.worst_vbar_increase,
            "avg_bound_margin": self.avg_bound_margin,
            "dissipation_ok": self.dissipation_ok,
            "lyapunov_lower_ok": self.lyapunov_lower_ok,
            "lyapunov_upper_ok": self.lyapunov_upper_ok,
            "prop1_ok": self.prop1_ok,
            "identity_ok": self.identity_ok,
            "identity_worst": self.identity_worst,
            "theorem1": self.theorem1,
            "theorem2": self.theorem2,
            "corollary1": self.corollary1,
            "violations": self.violations(),
        }
        return d


def run_diagnostics(log: "ClosedLoopLog", cfg: ExperimentConfig,
                    probes: int = 12, seed: int = 0) -> DiagnosticsReport:
    """Assemble every check into one report."""
    t1 = verify_theorem1(log, cfg)
    t2 = verify_theorem2(log, cfg)
    c1 = verify_corollary1(log, cfg, probes=probes, seed=seed)
    identity = np.abs(log.rotated_values - log.rotated_direct)
    prop1_ok = bool(np.all(log.warmstart_feasible[1:])) if log.T > 1 else True
    return DiagnosticsReport(
        vbar_series=log.rotated_values.copy(),
        vbar_monotone=t1["vbar_monotone"],
        worst_vbar_increase=t1["worst_vbar_increase"],
        avg_bound_margin=t2["avg_bound_margin"],
        dissipation_ok=bool(np.max(log.max_diss_residual) <= 1e-6),
        lyapunov_lower_ok=c1.get("lower_ok"),
        lyapunov_upper_ok=c1.get("upper_ok"),
        prop1_ok=prop1_ok,
        identity_ok=bool(identity.max() <= 1e-6),
        identity_worst=float(identity.max()),
        theorem1=t1, theorem2=t2, corollary1=c1)


def write_diagnostics_json(report: DiagnosticsReport, path) -> None:
    with open(path, "w") as fh:
        json.dump(report.to_dict(), fh, indent=2, sort_keys=True, default=_json_default)
        fh.write("\n")


def _json_default(v):
    if isinstance(v, (np.floating, np.integer)):
        return float(v)
    if isinstance(v, np.ndarray):
        return v.tolist()
    if isinstance(v, np.bool_):
        return bool(v)
    raise TypeError(f"not JSON-serializable: {type(v)}")
