"""Rotated costs and the theorem-level runtime checks."""

import dataclasses

import numpy as np
import pytest

from empc import diagnostics, model, ocp, simulate, storage
from tests.conftest import make_config


@pytest.fixture(scope="module")
def region_cfg(rotator, coupled_box, quartic, quartic_family_pinned,
               region_terminal, steady):
    return make_config(rotator, coupled_box, quartic, quartic_family_pinned,
                       region_terminal, steady, horizon=6, steps=8)


@pytest.fixture(scope="module")
def region_log(region_cfg):
    return simulate.run_closed_loop(region_cfg)


def test_rotated_stage_examples(quad_family, quartic, steady, rotator):
    th0 = np.zeros(6)
    x, u = np.array([0.7, -0.2]), np.array([0.1])
    got = diagnostics.rotated_stage(quad_family, quartic, steady, rotator,
                                    th0, th0, x, u)
    assert got == pytest.approx(quartic.eval(x, u) - steady.ls)

    assert diagnostics.rotated_stage(quad_family, quartic, steady, rotator,
                                     th0, th0, steady.xs, steady.us) == 0.0

    got = diagnostics.rotated_stage(quad_family, quartic, steady, rotator,
                                    th0, th0, np.array([1.0, 0.0]),
                                    np.zeros(1))
    assert got == pytest.approx(0.5)


def test_rotated_stage_plus_residual_is_rho(quad_family, quartic, steady,
                                            rotator):
    rho = storage.RhoFunction(0.2)
    rng = np.random.default_rng(17)
    for _ in range(1000):
        th = rng.uniform(-5, 5, size=6)
        thp = rng.uniform(-5, 5, size=6)
        x = rng.uniform(-1, 1, size=2)
        u = rng.uniform(-1, 1, size=1)
        xn = model.step(rotator, x, u)
        L = diagnostics.rotated_stage(quad_family, quartic, steady, rotator,
                                      th, thp, x, u)
        r = storage.dissipation_residual(quad_family, rho, quartic, steady,
                                         th, thp, x, u, xn)
        assert L + r == pytest.approx(rho.eval(x - steady.xs), abs=1e-12)


def test_rotated_value_identity_on_run(region_cfg, region_log):
    mism = np.abs(region_log.rotated_values - region_log.rotated_direct)
    assert mism.max() <= 1e-8
    for t, triple in enumerate(region_log.triples):
        vbar, mismatch, flagged = diagnostics.rotated_value(
            triple, region_cfg, region_log.states[t])
        assert not flagged
        assert vbar == pytest.approx(region_log.rotated_values[t], abs=1e-12)


def test_theorem1_on_run(region_cfg, region_log):
    sec = diagnostics.verify_theorem1(region_log, region_cfg)
    assert sec["descent_ok"]
    assert sec["worst_descent_violation"] <= 1e-6
    assert sec["tail_ok"]


def test_theorem1_flags_synthetic_ascent(region_cfg, region_log):
    bad = dataclasses.replace(region_log)
    bad.rotated_values = region_log.rotated_values.copy()
    bad.rotated_values[4] = bad.rotated_values[3] + 1.0  # forced increase
    sec = diagnostics.verify_theorem1(bad, region_cfg)
    assert not sec["descent_ok"]
    assert sec["worst_step"] == 4
    assert sec["worst_descent_violation"] >= 1.0


def test_theorem2_steady_run(small_eq_cfg):
    cfg = dataclasses.replace(small_eq_cfg, x0=np.zeros(2), sim_steps=6)
    fam = storage.StorageFamily.symmetric(storage.full_quadratic_basis(), 5.0,
                                          pinned=[(5, 0.0)])
    cfg = dataclasses.replace(cfg, storage=fam)
    log = simulate.run_closed_loop(cfg)
    sec = diagnostics.verify_theorem2(log, cfg)
    assert sec["bound_ok"]
    assert sec["final_running_avg"] == pytest.approx(cfg.steady.ls, abs=1e-9)


def test_corollary1_region_run(region_cfg, region_log):
    sec = diagnostics.verify_corollary1(region_log, region_cfg, probes=6,
                                        seed=0)
    assert sec["applicable"]
    assert sec["lower_ok"]
    assert sec["upper_ok"]
    assert sec["probes_checked"] >= 1


def test_corollary1_not_applicable_in_equality_mode(small_eq_cfg):
    log = simulate.run_closed_loop(
        dataclasses.replace(small_eq_cfg, sim_steps=3))
    sec = diagnostics.verify_corollary1(log, small_eq_cfg)
    assert not sec["applicable"]
    assert sec["lower_ok"] is None


def test_rotated_terminal_bound_is_penalty_on_slice(region_cfg):
    # On X_f = {x1 = 0} the pinned storage vanishes, so V-bar_f = x2^2.
    res = ocp.resolve_terminal(region_cfg.terminal, region_cfg.steady, 2, 1)
    for c in (-0.8, -0.1, 0.4, 1.0):
        x = np.array([0.0, c])
        vf = res.penalty(x) + storage.storage_eval(
            region_cfg.storage, region_cfg.storage.default_theta(), x)
        assert vf == pytest.approx(c ** 2)


def test_report_assembly_and_json(region_cfg, region_log, tmp_path):
    rep = diagnostics.run_diagnostics(region_log, region_cfg, probes=4)
    assert rep.violations() == []
    assert rep.prop1_ok and rep.dissipation_ok and rep.identity_ok
    path = tmp_path / "diagnostics.json"
    diagnostics.write_diagnostics_json(rep, path)
    import json
    with open(path) as fh:
        loaded = json.load(fh)
    assert loaded["violations"] == []
    assert len(loaded["vbar_series"]) == region_log.T
    assert loaded["theorem1"]["descent_ok"] is True
