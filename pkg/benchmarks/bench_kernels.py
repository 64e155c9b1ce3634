"""Time the jitted kernels against the pure-numpy fallback.

Runs every hot kernel at the reference scenario size (N=20, p=6) plus a
full per-step solve, and prints a side-by-side table.  The same numbers
fall out of the packaged paths: set EMPC_NO_NUMBA=1 to force the numpy
backend end to end.

Usage: python3 benchmarks/bench_kernels.py [--repeat 2000]
"""

import argparse
import time

import numpy as np

from empc import _kernels_numpy as knp

try:
    from empc import _kernels_numba as knb
except ImportError:
    knb = None

N, n, m, p = 20, 2, 1, 6
EX = np.array([(0, 0), (4, 0), (2, 0)], dtype=np.int64)
EU = np.array([(2,), (0,), (0,)], dtype=np.int64)
C = np.array([1.0, 1.0, -0.5])
SE = np.array([(2, 0), (0, 2), (1, 1), (1, 0), (0, 1), (0, 0)], dtype=np.int64)
XS = np.zeros(2)


def bench(fn, args, repeat):
    fn(*args)  # warm (and JIT-compile)
    t0 = time.perf_counter()
    for _ in range(repeat):
        fn(*args)
    return (time.perf_counter() - t0) / repeat


def bench_kernels(repeat):
    rng = np.random.default_rng(0)
    z = rng.uniform(-1, 1, size=(N + 1) * (n + p) + N * m)
    X = rng.uniform(-1, 1, size=(N + 1, n))
    U = rng.uniform(-1, 1, size=(N, m))

    cases = [
        ("monomial_batch", (SE, X)),
        ("stage_cost_batch", (0, EX, EU, C, X[:N], U)),
        ("ocp_objective", (z, N, n, m, p, 0, EX, EU, C, SE[:1], np.array([2.0]))),
        ("ocp_dissipation", (z, N, n, m, p, 0, EX, EU, C, SE, 0.2, XS, 0.0)),
    ]
    print(f"{'kernel':<18} {'numpy':>12} {'numba':>12} {'speedup':>9}")
    for name, args in cases:
        t_np = bench(getattr(knp, name), args, repeat)
        if knb is None:
            print(f"{name:<18} {t_np * 1e6:>10.1f}us {'n/a':>12} {'':>9}")
            continue
        t_nb = bench(getattr(knb, name), args, repeat)
        print(f"{name:<18} {t_np * 1e6:>10.1f}us {t_nb * 1e6:>10.1f}us "
              f"{t_np / t_nb:>8.1f}x")


def bench_solve():
    # One representative per-step solve through whichever backend is active.
    from empc import kernels
    from empc.config import load_config
    from empc import nlp, ocp
    from pathlib import Path
    import empc as pkg

    cfg = load_config(Path(pkg.__file__).parent / "configs" /
                      "quartic_eq_rho02.cfg")
    lay = ocp.layout(cfg)
    prob = ocp.build_ocp(cfg, cfg.x0, cfg.theta0)
    cand = ocp.cold_start(cfg, cfg.x0, cfg.theta0)
    fsol = nlp.solve(ocp.feasibility_phase(prob), lay.pack(cand), cfg.solver)
    t0 = time.perf_counter()
    sol = nlp.solve(prob, fsol.z, cfg.solver)
    dt = time.perf_counter() - t0
    print(f"\nfull t=0 solve [{kernels.BACKEND}]: {dt:.2f}s "
          f"({sol.iterations} inner iterations, status {sol.status})")


if __name__ == "__main__":
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=2000)
    args = ap.parse_args()
    bench_kernels(args.repeat)
    bench_solve()
