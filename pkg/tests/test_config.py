"""Flat key-value configuration parsing and validation."""

import pytest

from hstrace.config import ConfigError, parse_config


def test_valid_minimal_config():
    cfg = parse_config("N = 3\ns = 0.5\nmode = ground-state")
    assert cfg.N == 3 and cfg.s == 0.5 and cfg.mode == "ground-state"
    assert cfg.q == pytest.approx(2.5, abs=1e-15)


def test_comments_and_blank_lines():
    cfg = parse_config("# a comment\n\nN = 4  # trailing\n")
    assert cfg.N == 4


def test_s_range_message():
    with pytest.raises(ConfigError) as exc:
        parse_config("s = 1.0")
    assert any("s must lie in [0,1)" in v for v in exc.value.violations)


def test_n_range_message():
    with pytest.raises(ConfigError) as exc:
        parse_config("N = 1")
    assert any("N must be >= 2" in v for v in exc.value.violations)


def test_all_violations_collected():
    text = "N = 1\ns = 2.0\nwhat = 3\nmode = nope\nn_rho = x"
    with pytest.raises(ConfigError) as exc:
        parse_config(text)
    joined = "\n".join(exc.value.violations)
    assert "N must be >= 2" in joined
    assert "s must lie in [0,1)" in joined
    assert "unknown key 'what'" in joined
    assert "mode must be one of" in joined
    assert "needs an integer" in joined
    assert len(exc.value.violations) >= 5


def test_geometry_preconditions_checked():
    with pytest.raises(ConfigError) as exc:
        parse_config("rho0 = 3.0\nR_omega = 2.0")
    assert any("below R_omega" in v for v in exc.value.violations)


def test_duplicate_key_rejected():
    with pytest.raises(ConfigError):
        parse_config("N = 3\nN = 4")
