"""Command-line entry point: run, sweep, verify, gradcheck.

Exit codes: 0 success, 1 invariant/verification failure, 2 config or
parse error.  Scripted pipelines rely on these.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from empc import nlp
from empc.config import (apply_sweep_value, build_config, load_config,
                         parse_raw)
from empc.diagnostics import run_diagnostics, write_diagnostics_json
from empc.errors import EmpcError
from empc.ocp import build_ocp, verify_assumption4, verify_assumption5
from empc.simulate import (convergence_time, run_closed_loop,
                           transient_average, write_trajectory_csv)
from empc.storage import assumption6_structural


@dataclass(frozen=True)
class SweepSpec:
    """One swept parameter over a base config: which knob, which values."""

    parameter: str  # "rho_weight" | "theta_bound"
    values: tuple
    base_config: str

    def __post_init__(self):
        if self.parameter not in ("rho_weight", "theta_bound"):
            raise EmpcError(f"unknown sweep parameter {self.parameter!r}")
        if not self.values:
            raise EmpcError("sweep needs at least one value")


def _f(v) -> str:
    return repr(float(v))


def _run_one(cfg, out_dir, probes, seed, trace=False):
    """Run + diagnose + write artifacts; returns (log, report, summary)."""
    if trace:
        cfg = _with_trace(cfg)
    os.makedirs(out_dir, exist_ok=True)
    log = run_closed_loop(cfg)
    report = run_diagnostics(log, cfg, probes=probes, seed=seed)
    write_trajectory_csv(log, os.path.join(out_dir, "trajectory.csv"))
    write_diagnostics_json(report, os.path.join(out_dir, "diagnostics.json"))
    ct = convergence_time(log, 1e-3)
    summary = {
        "convergence_time": ct,
        "transient_average": transient_average(log, log.T),
        "theorem2_margin": report.avg_bound_margin,
        "violations": report.violations() + log.violations,
    }
    line = (f"convergence_time={'none' if ct is None else ct} "
            f"transient_average={_f(summary['transient_average'])} "
            f"theorem2_margin={_f(summary['theorem2_margin'])} "
            f"violations={len(summary['violations'])}")
    with open(os.path.join(out_dir, "summary.txt"), "w") as fh:
        fh.write(line + "\n")
        for v in summary["violations"]:
            fh.write(f"violation: {v}\n")
    return log, report, line, summary


def _with_trace(cfg):
    from dataclasses import replace
    return replace(cfg, solver=replace(cfg.solver, trace=True))


def cmd_run(args) -> int:
    try:
        cfg = load_config(args.config)
    except (EmpcError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    out_dir = args.out or cfg.out_dir or "out"
    log, report, line, summary = _run_one(
        cfg, out_dir, args.probes, args.seed, args.trace)
    print(line)
    for v in summary["violations"]:
        print(f"violation: {v}", file=sys.stderr)
    return 0 if not summary["violations"] else 1


def _sweep_cell(packed):
    path, parameter, value, out_dir, probes, seed = packed
    try:
        with open(path) as fh:
            raw = parse_raw(fh.read())
        cfg = build_config(apply_sweep_value(raw, parameter, value),
                           label=f"{parameter}={value}")
        log, report, _, summary = _run_one(
            cfg, os.path.join(out_dir, f"{parameter}={value:g}"), probes, seed)
        return {"value": value,
                "convergence_time": summary["convergence_time"],
                "transient_average": summary["transient_average"],
                "theorem2_margin": summary["theorem2_margin"],
                "error": ""}
    except Exception as exc:  # a failed cell is recorded, sweep continues
        return {"value": value, "convergence_time": None,
                "transient_average": math.nan, "theorem2_margin": math.nan,
                "error": str(exc)}


def _trend_ok(parameter, rows) -> tuple[bool, str]:
    ct = [math.inf if r["convergence_time"] is None else r["convergence_time"]
          for r in rows]
    ta = [r["transient_average"] for r in rows]
    if parameter == "rho_weight":
        ok = all(ct[i + 1] <= ct[i] for i in range(len(ct) - 1)) and \
            all(ta[i + 1] >= ta[i] for i in range(len(ta) - 1))
        desc = "convergence_time non-increasing and transient_average non-decreasing"
    else:  # theta_bound
        ok = all(ta[i + 1] <= ta[i] for i in range(len(ta) - 1))
        desc = "transient_average non-increasing"
    return ok, desc


def cmd_sweep(args) -> int:
    try:
        with open(args.config) as fh:
            parse_raw(fh.read())  # fail fast on config errors
        spec = SweepSpec(args.param,
                         tuple(float(v) for v in args.values.split(",")
                               if v.strip()),
                         args.config)
    except (EmpcError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    os.makedirs(args.out, exist_ok=True)
    cells = [(spec.base_config, spec.parameter, v, args.out, args.probes,
              args.seed) for v in spec.values]
    if args.jobs > 1 and len(cells) > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as ex:
            rows = list(ex.map(_sweep_cell, cells))
    else:
        rows = [_sweep_cell(c) for c in cells]

    with open(os.path.join(args.out, "sweep.csv"), "w") as fh:
        fh.write("value,convergence_time,transient_average,theorem2_margin\n")
        for r in rows:
            ct = "none" if r["convergence_time"] is None else str(r["convergence_time"])
            fh.write(f"{_f(r['value'])},{ct},{_f(r['transient_average'])},"
                     f"{_f(r['theorem2_margin'])}\n")

    failed = [r for r in rows if r["error"]]
    for r in failed:
        print(f"cell {args.param}={r['value']:g} failed: {r['error']}",
              file=sys.stderr)
    ok, desc = _trend_ok(args.param, rows)
    print(f"trend[{args.param}]: {desc}: {'ok' if ok else 'VIOLATED'}")
    for r in rows:
        ct = "none" if r["convergence_time"] is None else str(r["convergence_time"])
        print(f"  {args.param}={r['value']:g} convergence_time={ct} "
              f"transient_average={_f(r['transient_average'])}")
    return 0 if ok and not failed else 1


def cmd_verify(args) -> int:
    try:
        cfg = load_config(args.config)
    except (EmpcError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    a4 = verify_assumption4(cfg.terminal, cfg, samples=args.samples,
                            seed=args.seed)
    a5 = verify_assumption5(cfg.storage, cfg.terminal, cfg.rho, cfg,
                            samples=(max(args.samples // 5, 10), 50),
                            seed=args.seed)
    a6 = assumption6_structural(cfg.storage, cfg.steady.xs)
    print("assumption1 (parameter box compact): pass (finite bounds by construction)")
    print("assumption2 (storage continuous): pass (polynomial by construction)")
    for rep in (a4, a5):
        tag = "vacuous-pass" if rep.vacuous else ("pass" if rep.passed else "FAIL")
        print(f"{rep.name}: {tag}")
        for k, v in rep.margins.items():
            print(f"  margin {k} = {v:.3e}")
        if rep.note:
            print(f"  note: {rep.note}")
        if not rep.passed and rep.witnesses.get("violations"):
            for x, th, r in rep.witnesses["violations"]:
                print(f"  witness x={x} theta={th} residual={r:.3e}")
        elif not rep.passed:
            for k, x in rep.witnesses.items():
                print(f"  witness {k}: x={x}")
    print(f"assumption6 (storage zero at xs for all theta): "
          f"{'holds structurally' if a6 else 'not imposed'}")
    return 0 if a4.passed and a5.passed else 1


def cmd_gradcheck(args) -> int:
    try:
        cfg = load_config(args.config)
    except (EmpcError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    prob = build_ocp(cfg, cfg.x0, cfg.theta0)
    rng = np.random.default_rng(args.seed)
    lo = np.maximum(prob.var_lo, -2.0)
    hi = np.minimum(prob.var_hi, 2.0)
    worst = 0.0
    worst_label = "objective"
    for _ in range(args.points):
        r = rng.random(prob.num_vars)
        z = lo + (0.05 + 0.9 * r) * (hi - lo)
        res = nlp.grad_check(prob, z)
        if res.max_rel_error > worst:
            worst = res.max_rel_error
            worst_label = res.worst_label
    print(f"worst gradient error {worst:.3e} in block '{worst_label}' "
          f"over {args.points} points")
    return 0 if worst <= 1e-5 else 1


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(
        prog="empc",
        description="Economic MPC with dissipation-constrained storage functions")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="closed-loop run with diagnostics")
    p.add_argument("config")
    p.add_argument("--out", default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--probes", type=int, default=12)
    p.add_argument("--trace", action="store_true")
    p.set_defaults(fn=cmd_run)

    p = sub.add_parser("sweep", help="parameter sweep over a base config")
    p.add_argument("config")
    p.add_argument("--param", choices=("rho_weight", "theta_bound"),
                   required=True)
    p.add_argument("--values", required=True,
                   help="comma-separated parameter values")
    p.add_argument("--out", default="out")
    p.add_argument("--jobs", type=int, default=os.cpu_count() or 1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--probes", type=int, default=12)
    p.set_defaults(fn=cmd_sweep)

    p = sub.add_parser("verify", help="sample-check the standing assumptions")
    p.add_argument("config")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--samples", type=int, default=1000)
    p.set_defaults(fn=cmd_verify)

    p = sub.add_parser("gradcheck", help="finite-difference check of the OCP")
    p.add_argument("config")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--points", type=int, default=20)
    p.set_defaults(fn=cmd_gradcheck)

    args = ap.parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
