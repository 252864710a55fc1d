"""Acceptance criteria, one test per numbered check group.

Each test asserts the corresponding suite checks in one pass/fail line;
the suite fixture runs the matrix once per session at default
resolution.
"""


def _assert_group(report, prefix):
    checks = report.by_prefix(prefix)
    assert checks, f"suite produced no checks with prefix {prefix}"
    failing = [c for c in checks if not c.passed]
    assert not failing, "; ".join(
        f"{c.check_id}: measured={c.measured!r} threshold={c.threshold!r}"
        f" {c.detail}" for c in failing)


def test_criterion_01_closed_form_constants(suite_report):
    _assert_group(suite_report, "01")


def test_criterion_02_explicit_extremal_oracle(suite_report):
    _assert_group(suite_report, "02")


def test_criterion_03_limit_anchor(suite_report):
    _assert_group(suite_report, "03")


def test_criterion_04_energy_identity(suite_report):
    _assert_group(suite_report, "04")


def test_criterion_05_ground_state_structure(suite_report):
    _assert_group(suite_report, "05")


def test_criterion_06_coefficient_bounds(suite_report):
    _assert_group(suite_report, "06")


def test_criterion_07_metric_expansion(suite_report):
    _assert_group(suite_report, "07")


def test_criterion_08_expansion_slope(suite_report):
    _assert_group(suite_report, "08")


def test_criterion_09_error_budget(suite_report):
    _assert_group(suite_report, "09")


def test_criterion_10_strict_inequality(suite_report):
    _assert_group(suite_report, "10")


def test_criterion_11_existence(suite_report):
    _assert_group(suite_report, "11")


def test_criterion_12_criterion_equivalence(suite_report):
    _assert_group(suite_report, "12")


def test_suite_size_contract(suite_report):
    assert len(suite_report.checks) >= 12
