"""Half-space ground state: values, structure and identities."""

import math

import numpy as np
import pytest

from hstrace.numerics import ProblemParams, build_axi_grid
from hstrace import halfspace as hs


def test_limiting_constant_closed_forms():
    # oracle: 2 Gamma^2((N+1)/4) / Gamma^2((N-1)/4) collapses at N=3,5
    assert hs.evaluate_SN1(3) == pytest.approx(2.0 / math.pi, abs=1e-14)
    assert hs.evaluate_SN1(5) == pytest.approx(math.pi / 2.0, abs=1e-14)
    with pytest.raises(ValueError):
        hs.evaluate_SN1(1)


def test_explicit_bubble_is_near_optimal_at_s0(gs_coarse):
    # at s=0 the explicit profile ((1+z)^2+r^2)^{-(N-1)/2} is an exact
    # minimizer, so its quotient can only sit above the computed minimum
    # by the discretization error of the coarse grid
    p = ProblemParams(N=3, s=0.0)
    grid = build_axi_grid(p, R=30.0, nz=48, nr=64, grading=1.06)
    gs = hs.compute_ground_state(p, grid, hs.SolverOptions(max_outer=600))
    Z, R = np.meshgrid(grid.z_nodes, grid.r_nodes, indexing="ij")
    u = hs.bubble_profile(p, Z, R)
    u[-1, :] = 0.0  # the solver space has the truncation edges clamped
    u[:, -1] = 0.0
    from hstrace.numerics import assemble_dirichlet_energy, trace_functional
    form = assemble_dirichlet_energy(grid, p)
    quot = form.energy(u.reshape(-1)) / trace_functional(
        grid, p, u, p.q) ** (2.0 / p.q)
    assert gs.S_value <= quot * (1.0 + 1e-10)
    assert gs.S_value == pytest.approx(quot, rel=0.05)


def test_trace_normalization(gs_coarse):
    from hstrace.numerics import trace_functional
    t = trace_functional(gs_coarse.grid, gs_coarse.params, gs_coarse.w,
                         gs_coarse.params.q)
    assert t == pytest.approx(1.0, abs=1e-8)


def test_radial_monotonicity(gs_coarse):
    ok, worst = hs.radial_monotonicity_check(gs_coarse)
    assert ok, f"worst radial increment {worst}"


def test_positivity_and_peak_at_origin(gs_coarse):
    w = gs_coarse.w
    assert np.all(w >= 0.0)
    assert w[0, 0] == np.max(w)


def test_curvature_integrals_ordering(gs_coarse):
    # B uses only the z-derivative part of the same integrand, so 0 < B < A
    assert 0.0 < gs_coarse.B < gs_coarse.A


def test_coefficient_bounds(gs_coarse):
    coef = hs.curvature_coefficient(gs_coarse)
    N = gs_coarse.params.N
    assert (N - 2.0) / (2.0 * N) < coef.c_value < 0.5


def test_pohozaev_residual_small(gs35):
    assert hs.pohozaev_residual(gs35) < 0.05


def test_pohozaev_residual_large_for_wrong_field(gs_coarse):
    # a perturbed field is not a critical point, so the identity degrades
    bad = gs_coarse.w * (1.0 + 0.5 * np.random.default_rng(3).random(
        gs_coarse.w.shape))
    assert hs.pohozaev_residual(gs_coarse, bad) > \
        5.0 * hs.pohozaev_residual(gs_coarse)


def test_decay_exponent(gs35):
    slope = hs.decay_fit(gs35)
    N = gs35.params.N
    assert abs(slope + (N - 1.0)) / (N - 1.0) <= 0.15


def test_decay_fit_needs_enough_nodes():
    p = ProblemParams(N=3, s=0.5)
    grid = build_axi_grid(p, R=30.0, nz=16, nr=12, grading=1.0)
    gs = hs.GroundState(params=p, grid=grid,
                        w=np.ones(grid.shape), S_value=1.0, A=1.0, B=0.5,
                        norm_residual=0.0, lam=1.0, el_residual=0.0,
                        iterations=0)
    with pytest.raises(hs.GridFitError):
        hs.decay_fit(gs)


def test_run_csv_layout(tmp_path, gs_coarse):
    path = tmp_path / "run.csv"
    hs.write_run_csv(path, gs_coarse)
    lines = path.read_text().strip().splitlines()
    assert lines[0].split(",") == ["iter", "quotient", "el_residual",
                                   "norm_residual"]
    assert lines[-2].startswith("N,s,R,S_value")
    assert len(lines[-1].split(",")) == 9
