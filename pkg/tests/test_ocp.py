"""Stacked problem structure, warm starts, and terminal-ingredient checks."""

import dataclasses

import numpy as np
import pytest

from empc import model, nlp, ocp, storage
from empc.errors import ConfigError, DomainError
from tests.conftest import make_config


def test_layout_matches_horizon_arithmetic(rotator, coupled_box, quartic,
                                           quad_family, steady):
    cfg = make_config(rotator, coupled_box, quartic, quad_family,
                      ocp.TerminalIngredients.equality(), steady, horizon=20)
    lay = ocp.layout(cfg)
    assert lay.num_vars == 21 * 2 + 20 * 1 + 21 * 6 == 188
    prob = ocp.build_ocp(cfg, cfg.x0, cfg.theta0)
    assert prob.num_vars == 188


def test_block_enumeration_n1(rotator, coupled_box, quartic, quad_family,
                              steady):
    cfg = make_config(rotator, coupled_box, quartic, quad_family,
                      ocp.TerminalIngredients.equality(), steady, horizon=1)
    prob = ocp.build_ocp(cfg, cfg.x0, cfg.theta0)
    eq = {b.label: b.dim for b in prob.eq_blocks}
    ineq = {b.label: b.dim for b in prob.ineq_blocks}
    assert eq == {"initial state": 2, "initial theta": 6, "dynamics": 2,
                  "terminal": 2}
    assert ineq == {"path": 6, "dissipation": 1}


def test_all_steady_candidate_feasible(small_eq_cfg):
    cfg = small_eq_cfg
    N = cfg.horizon
    xs, us = cfg.steady.xs, cfg.steady.us
    cand = ocp.OcpSolutionTriple(np.tile(xs, (N + 1, 1)), np.tile(us, (N, 1)),
                                 np.zeros((N + 1, cfg.storage.p)), 0.0)
    cand = dataclasses.replace(cand, value=ocp.candidate_value(cand, cfg))
    assert cand.value == pytest.approx(N * cfg.steady.ls, abs=1e-12)
    rep = ocp.validate_candidate(cand, cfg, xs, np.zeros(cfg.storage.p))
    assert rep.feasible
    assert rep.max_residual <= 1e-12


def test_steady_start_never_beaten_upward(small_eq_cfg):
    # J_N <= N * ls + 1e-6 when starting at the steady state.
    cfg = small_eq_cfg
    prob = ocp.build_ocp(cfg, cfg.steady.xs, np.zeros(cfg.storage.p))
    cand = ocp.cold_start(cfg, cfg.steady.xs, np.zeros(cfg.storage.p))
    sol = nlp.solve(prob, ocp.layout(cfg).pack(cand), cfg.solver)
    assert sol.objective_value <= cfg.horizon * cfg.steady.ls + 1e-6


def test_shift_warm_start_structure(small_eq_cfg, small_region_cfg):
    cfg = small_eq_cfg
    N, p = cfg.horizon, cfg.storage.p
    xs = cfg.steady.xs
    prev = ocp.OcpSolutionTriple(np.tile(xs, (N + 1, 1)),
                                 np.tile(cfg.steady.us, (N, 1)),
                                 np.zeros((N + 1, p)), 0.0)
    sh = ocp.shift_warm_start(prev, cfg)
    assert np.array_equal(sh.x_seq[-1], xs)
    assert np.array_equal(sh.theta_seq[-1], np.zeros(p))

    # Region mode: terminal state (0, c) maps through u = -c to (0, 0).
    cfg = small_region_cfg
    N, p = cfg.horizon, cfg.storage.p
    rng = np.random.default_rng(5)
    X = rng.uniform(-0.5, 0.5, size=(N + 1, 2))
    X[-1] = [0.0, 0.3]
    prev = ocp.OcpSolutionTriple(X, rng.uniform(-0.5, 0.5, size=(N, 1)),
                                 np.zeros((N + 1, p)), 0.0)
    sh = ocp.shift_warm_start(prev, cfg)
    assert sh.u_seq[-1, 0] == pytest.approx(-0.3)
    assert np.allclose(sh.x_seq[-1], [0.0, 0.0])
    assert np.array_equal(sh.x_seq[:-1], prev.x_seq[1:])
    assert np.array_equal(sh.u_seq[:-1], prev.u_seq[1:])


def test_validate_candidate_flags_theta_box(small_eq_cfg):
    cfg = small_eq_cfg
    N, p = cfg.horizon, cfg.storage.p
    xs = cfg.steady.xs
    TH = np.zeros((N + 1, p))
    TH[2, 0] = 7.5  # outside [-5, 5]
    cand = ocp.OcpSolutionTriple(np.tile(xs, (N + 1, 1)),
                                 np.tile(cfg.steady.us, (N, 1)), TH, 0.0)
    rep = ocp.validate_candidate(cand, cfg, xs, np.zeros(p))
    assert not rep.feasible
    assert rep.ineq_residuals["theta box"] == pytest.approx(2.5)


def test_two_residual_paths_agree(small_eq_cfg):
    cfg = small_eq_cfg
    lay = ocp.layout(cfg)
    prob = ocp.build_ocp(cfg, cfg.x0, cfg.theta0)
    cand = ocp.cold_start(cfg, cfg.x0, cfg.theta0)
    fsol = nlp.solve(ocp.feasibility_phase(prob), lay.pack(cand), cfg.solver)
    sol = nlp.solve(prob, fsol.z, cfg.solver)
    assert sol.status in ("optimal", "feasible_suboptimal")

    triple = lay.unpack(sol.z, sol.objective_value)
    rep = ocp.validate_candidate(triple, cfg, cfg.x0, cfg.theta0)
    # The stacked solver path and the per-step validation path must agree
    # on feasibility within twice the solver tolerance.
    assert rep.feasible or rep.max_residual <= 2 * cfg.solver.feas_tol
    assert max(sol.eq_residual_inf, sol.ineq_violation_inf) <= \
        2 * max(rep.max_residual, cfg.solver.feas_tol)


def test_build_ocp_domain_checks(small_eq_cfg):
    cfg = small_eq_cfg
    with pytest.raises(DomainError):
        ocp.build_ocp(cfg, np.array([5.0, 0.0]), cfg.theta0)
    with pytest.raises(DomainError):
        ocp.build_ocp(cfg, cfg.x0, np.full(cfg.storage.p, 99.0))


def test_region_mode_requires_policy(steady):
    term = ocp.TerminalIngredients("region", E=np.array([[1.0, 0.0]]),
                                   e=np.array([0.0]))
    with pytest.raises(ConfigError):
        ocp.resolve_terminal(term, steady, 2, 1)


def test_config_validation(rotator, coupled_box, quartic, quad_family, steady):
    with pytest.raises(ConfigError, match="horizon"):
        make_config(rotator, coupled_box, quartic, quad_family,
                    ocp.TerminalIngredients.equality(), steady, horizon=0)
    with pytest.raises(ConfigError, match="x0"):
        make_config(rotator, coupled_box, quartic, quad_family,
                    ocp.TerminalIngredients.equality(), steady, x0=(3.0, 0.0))
    with pytest.raises(ConfigError, match="theta0"):
        make_config(rotator, coupled_box, quartic, quad_family,
                    ocp.TerminalIngredients.equality(), steady,
                    theta0=np.full(6, 99.0))


def test_assumption4_shipped_region(small_region_cfg):
    cfg = small_region_cfg
    rep = ocp.verify_assumption4(cfg.terminal, cfg, samples=400, seed=0)
    assert rep.passed and not rep.vacuous
    assert rep.margins["decrease"] == pytest.approx(0.0, abs=1e-12)
    assert rep.margins["invariance"] == pytest.approx(0.0, abs=1e-12)


def test_assumption4_bad_policy_flagged(small_region_cfg, steady):
    # kf(x) = +x2 maps (0, c) to (2c, 0), outside X_f for c != 0.
    bad = ocp.TerminalIngredients.region(
        [[1.0, 0.0]], [0.0], [-1, -1], [1, 1],
        [((0, 2), 1.0)], [[0.0, 1.0]], [0.0])
    cfg = dataclasses.replace(small_region_cfg, terminal=bad)
    rep = ocp.verify_assumption4(bad, cfg, samples=200, seed=0)
    assert not rep.passed
    assert rep.margins["invariance"] > 0.05
    assert "invariance" in rep.witnesses


def test_assumption4_equality_vacuous(small_eq_cfg):
    rep = ocp.verify_assumption4(small_eq_cfg.terminal, small_eq_cfg)
    assert rep.passed and rep.vacuous


def test_assumption5_shipped_region(small_region_cfg):
    rep = ocp.verify_assumption5(small_region_cfg.storage,
                                 small_region_cfg.terminal,
                                 small_region_cfg.rho, small_region_cfg,
                                 samples=(80, 20), seed=0)
    assert rep.passed
    assert "canonical" in rep.note


def test_assumption5_rho10_fails(small_region_cfg):
    rep = ocp.verify_assumption5(small_region_cfg.storage,
                                 small_region_cfg.terminal,
                                 storage.RhoFunction(10.0), small_region_cfg,
                                 samples=(80, 20), seed=0)
    assert not rep.passed
    # (10 - 1) * x2^2 at the region edge x2 = +-1
    assert rep.margins["min_residual"] == pytest.approx(9.0, abs=1e-6)


def test_assumption5_equality_vacuous(small_eq_cfg):
    rep = ocp.verify_assumption5(small_eq_cfg.storage, small_eq_cfg.terminal,
                                 small_eq_cfg.rho, small_eq_cfg)
    assert rep.passed and rep.vacuous


def test_terminal_interior_check(rotator, coupled_box, quartic,
                                 quartic_family_pinned, steady):
    # xs on the box edge of the free direction is not interior.
    term = ocp.TerminalIngredients.region(
        [[1.0, 0.0]], [0.0], [-1, 0.0], [1, 1],
        [((0, 2), 1.0)], [[0.0, -1.0]], [0.0])
    with pytest.raises(ConfigError, match="interior"):
        make_config(rotator, coupled_box, quartic, quartic_family_pinned,
                    term, steady)
