"""Shared fixtures: expensive solves run once per session."""

import pytest

from hstrace.config import RunConfig
from hstrace.numerics import ProblemParams, build_axi_grid
from hstrace import halfspace as hs
from hstrace.suite import run_suite


@pytest.fixture(scope="session")
def gs35():
    """Default-resolution ground state at N=3, s=0.5."""
    p = ProblemParams(N=3, s=0.5)
    grid = hs.default_grid(p)
    return hs.compute_ground_state(p, grid)


@pytest.fixture(scope="session")
def gs_coarse():
    """Cheap ground state for structural (non-tolerance) tests."""
    p = ProblemParams(N=3, s=0.5)
    grid = build_axi_grid(p, R=30.0, nz=48, nr=64, grading=1.06)
    return hs.compute_ground_state(p, grid,
                                   hs.SolverOptions(max_outer=600))


@pytest.fixture(scope="session")
def suite_report(tmp_path_factory):
    """The full acceptance matrix at default resolution, run once."""
    out = tmp_path_factory.mktemp("suite")
    return run_suite(RunConfig(), out_dir=str(out), jobs=4)
