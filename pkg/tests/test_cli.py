"""CLI exit codes, CSV emission and determinism."""

import pytest

from hstrace.cli import main


COARSE = """
N = 3
s = 0.5
R = 20
nz = 32
nr = 48
n_rho = 24
n_theta = 16
R_omega = 1.0
rho0 = 0.45
max_outer = 400
"""


def _cfg_file(tmp_path, text, name="run.cfg"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


def test_config_error_exit_code(tmp_path):
    cfg = _cfg_file(tmp_path, "s = 1.0\n")
    assert main(["ground-state", "--config", cfg]) == 2


def test_missing_config_exit_code(tmp_path):
    assert main(["ground-state", "--config",
                 str(tmp_path / "nope.cfg")]) == 2


def test_ground_state_run_and_determinism(tmp_path, capsys):
    cfg = _cfg_file(tmp_path, COARSE)
    out1, out2 = tmp_path / "a", tmp_path / "b"
    assert main(["ground-state", "--config", cfg, "--out", str(out1)]) == 0
    assert main(["ground-state", "--config", cfg, "--out", str(out2)]) == 0
    b1 = (out1 / "ground_state.csv").read_bytes()
    b2 = (out2 / "ground_state.csv").read_bytes()
    assert b1 == b2
    assert b"S_value" in b1


def test_domain_command(tmp_path):
    cfg = _cfg_file(tmp_path, COARSE + "h0 = -0.2\n")
    out = tmp_path / "dom"
    assert main(["domain", "--config", cfg, "--out", str(out)]) == 0
    assert (out / "domain.csv").exists()


def test_coercivity_failure_exit_code(tmp_path):
    cfg = _cfg_file(tmp_path, COARSE + "h0 = -1000\n")
    assert main(["coercivity", "--config", cfg,
                 "--out", str(tmp_path / "c")]) == 1


def test_domain_refuses_noncoercive_form(tmp_path):
    cfg = _cfg_file(tmp_path, COARSE + "h0 = -1000\n")
    assert main(["domain", "--config", cfg,
                 "--out", str(tmp_path / "d")]) == 1


def test_criterion_command(tmp_path):
    cfg = _cfg_file(tmp_path, COARSE + "h0 = -0.2\n")
    out = tmp_path / "crit"
    code = main(["criterion", "--config", cfg, "--out", str(out)])
    assert code in (0, 1)
    text = (out / "criterion.csv").read_text()
    assert text.splitlines()[0].startswith("case,H0,h0,c_value,lhs")


def test_suite_coarse_config_fails_checks(tmp_path, capsys):
    cfg = _cfg_file(tmp_path, COARSE)
    out = tmp_path / "suite"
    code = main(["suite", "--config", cfg, "--out", str(out), "--jobs", "4"])
    assert code == 1
    printed = capsys.readouterr().out
    assert printed.count("] ") >= 12  # full matrix still reported
    assert "overall: FAIL" in printed
    assert (out / "suite_report.csv").exists()
    assert (out / "criterion.csv").exists()
