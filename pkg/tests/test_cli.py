"""Command-line behavior: artifacts, exit codes, determinism."""

from pathlib import Path

import numpy as np
import pytest

import empc
from empc import cli

CONFIG_DIR = Path(empc.__file__).parent / "configs"

SMALL_CFG = """
[system]
kind = rotator

[constraints]
state_lo = -1 -1
state_hi = 1 1
input_mode = coupled
c_lo = -1
c_hi = 1
d_lo = 0 -1
d_hi = 0 -1

[cost]
kind = quartic

[storage]
basis = 2 0; 0 2; 1 1; 1 0; 0 1; 0 0
bound = 5
pinned =

[rho]
weight = 0.2

[terminal]
mode = equality

[horizon]
length = 6

[sim]
steps = 8
x0 = 1 1
label = cli_test

[solver]
feas_tol = 1e-10
"""


@pytest.fixture(scope="module")
def small_cfg_path(tmp_path_factory):
    path = tmp_path_factory.mktemp("cfg") / "small.cfg"
    path.write_text(SMALL_CFG)
    return path


def test_cmd_run_artifacts_and_exit(small_cfg_path, tmp_path, capsys):
    out = tmp_path / "run"
    rc = cli.main(["run", str(small_cfg_path), "--out", str(out)])
    assert rc == 0
    assert (out / "trajectory.csv").exists()
    assert (out / "diagnostics.json").exists()
    assert (out / "summary.txt").exists()
    line = capsys.readouterr().out
    assert "convergence_time=" in line and "theorem2_margin=" in line


def test_cmd_run_rejects_bad_horizon(small_cfg_path, tmp_path, capsys):
    bad = tmp_path / "bad.cfg"
    bad.write_text(SMALL_CFG.replace("length = 6", "length = 0"))
    rc = cli.main(["run", str(bad), "--out", str(tmp_path / "o")])
    assert rc == 2
    assert "horizon must be >= 1" in capsys.readouterr().err


def test_cmd_run_rejects_unknown_key(small_cfg_path, tmp_path, capsys):
    bad = tmp_path / "typo.cfg"
    bad.write_text(SMALL_CFG.replace("weight = 0.2", "weight = 0.2\nweigth = 1"))
    rc = cli.main(["run", str(bad), "--out", str(tmp_path / "o")])
    assert rc == 2


def test_cmd_run_byte_identical(small_cfg_path, tmp_path):
    out1 = tmp_path / "a"
    out2 = tmp_path / "b"
    assert cli.main(["run", str(small_cfg_path), "--out", str(out1)]) == 0
    assert cli.main(["run", str(small_cfg_path), "--out", str(out2)]) == 0
    b1 = (out1 / "trajectory.csv").read_bytes()
    b2 = (out2 / "trajectory.csv").read_bytes()
    assert b1 == b2
    assert (out1 / "diagnostics.json").read_bytes() == \
        (out2 / "diagnostics.json").read_bytes()


def test_single_value_sweep_matches_run(small_cfg_path, tmp_path):
    run_out = tmp_path / "run"
    sweep_out = tmp_path / "sweep"
    assert cli.main(["run", str(small_cfg_path), "--out", str(run_out)]) == 0
    rc = cli.main(["sweep", str(small_cfg_path), "--param", "rho_weight",
                   "--values", "0.2", "--out", str(sweep_out), "--jobs", "1"])
    assert rc == 0
    cell = sweep_out / "rho_weight=0.2"
    assert (cell / "trajectory.csv").read_bytes() == \
        (run_out / "trajectory.csv").read_bytes()
    lines = (sweep_out / "sweep.csv").read_text().strip().splitlines()
    assert lines[0] == "value,convergence_time,transient_average,theorem2_margin"
    assert len(lines) == 2


def test_sweep_bad_cell_recorded(small_cfg_path, tmp_path, capsys):
    rc = cli.main(["sweep", str(small_cfg_path), "--param", "theta_bound",
                   "--values", "5,-1", "--out", str(tmp_path / "s"),
                   "--jobs", "1"])
    assert rc == 1  # the -1 bound cell fails to build
    err = capsys.readouterr().err
    assert "theta_bound=-1" in err
    lines = (tmp_path / "s" / "sweep.csv").read_text().strip().splitlines()
    assert len(lines) == 3


def test_cmd_verify_region_passes(capsys):
    rc = cli.main(["verify", str(CONFIG_DIR / "quartic_region.cfg"),
                   "--samples", "200"])
    out = capsys.readouterr().out
    assert rc == 0
    assert "assumption4: pass" in out
    assert "assumption5: pass" in out
    assert "holds structurally" in out


def test_cmd_verify_equality_vacuous(capsys):
    rc = cli.main(["verify", str(CONFIG_DIR / "quartic_eq_rho02.cfg"),
                   "--samples", "100"])
    out = capsys.readouterr().out
    assert rc == 0
    assert "vacuous-pass" in out
    assert "not imposed" in out


def test_cmd_verify_rho10_fails(tmp_path, capsys):
    text = (CONFIG_DIR / "quartic_region.cfg").read_text()
    bad = tmp_path / "rho10.cfg"
    bad.write_text(text.replace("weight = 0.2", "weight = 10"))
    rc = cli.main(["verify", str(bad), "--samples", "200"])
    assert rc == 1
    assert "assumption5: FAIL" in capsys.readouterr().out


def test_cmd_gradcheck_small(small_cfg_path, capsys):
    rc = cli.main(["gradcheck", str(small_cfg_path), "--points", "5"])
    assert rc == 0
    assert "worst gradient error" in capsys.readouterr().out


def test_cmd_gradcheck_reports_bad_block(small_cfg_path, capsys, monkeypatch):
    from empc import nlp

    def fake(prob, z, h=1e-6):
        return nlp.GradCheckResult(3e-2, "dissipation k=4", {})

    monkeypatch.setattr(cli.nlp, "grad_check", fake)
    rc = cli.main(["gradcheck", str(small_cfg_path), "--points", "2"])
    assert rc == 1
    assert "dissipation k=4" in capsys.readouterr().out
