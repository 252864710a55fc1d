"""Quadrature rules, grids and the CG kernel."""

import math

import numpy as np
import pytest
import scipy.sparse as sp

from hstrace.numerics import (AxiGrid, ConvergenceError, GridError,
                              IndefiniteFormError, ProblemParams, SparseForm,
                              assemble_dirichlet_energy, build_axi_grid,
                              cell_masses, graded_nodes, hat_weights,
                              solve_spd, sphere_area, trace_functional)


def test_sphere_area_closed_forms():
    assert sphere_area(2) == pytest.approx(2.0 * math.pi, abs=1e-14)
    assert sphere_area(3) == pytest.approx(4.0 * math.pi, abs=1e-13)
    assert sphere_area(4) == pytest.approx(2.0 * math.pi ** 2, abs=1e-13)


def test_problem_params_exponent():
    p = ProblemParams(N=3, s=0.5)
    assert p.q == pytest.approx(2.5, abs=1e-15)
    assert ProblemParams(N=3, s=0.0).q == pytest.approx(3.0, abs=1e-15)


def test_graded_nodes_geometry():
    nodes = graded_nodes(10.0, 9, 1.5)
    widths = np.diff(nodes)
    assert nodes[0] == 0.0 and nodes[-1] == pytest.approx(10.0, rel=1e-14)
    assert np.allclose(widths[1:] / widths[:-1], 1.5)
    with pytest.raises(GridError):
        graded_nodes(1.0, 8, 0.9)


def test_hat_weights_integrate_linears_exactly():
    # oracle: int_0^2 r^p (a + b r) dr in closed form
    nodes = graded_nodes(2.0, 17, 1.2)
    for p in (0.0, 0.5, 2.0):
        w = hat_weights(nodes, p)
        a, b = 0.7, -0.3
        exact = a * 2.0 ** (p + 1) / (p + 1) + b * 2.0 ** (p + 2) / (p + 2)
        assert np.sum(w * (a + b * nodes)) == pytest.approx(exact, rel=1e-13)


def test_cell_masses_sum_to_total():
    nodes = graded_nodes(3.0, 21, 1.1)
    assert np.sum(cell_masses(nodes, 1.5)) == pytest.approx(
        3.0 ** 2.5 / 2.5, rel=1e-13)


def test_build_axi_grid_rejects_bad_input():
    p = ProblemParams(N=3, s=0.5)
    with pytest.raises(GridError):
        build_axi_grid(p, R=-1.0, nz=16, nr=16)
    with pytest.raises(GridError):
        build_axi_grid(p, R=10.0, nz=4, nr=16)
    with pytest.raises(GridError):
        build_axi_grid(p, R=10.0, nz=16, nr=16, grading=0.5)
    with pytest.raises(ValueError):
        ProblemParams(N=3, s=1.0)


def test_trace_functional_constant_field():
    # oracle: sigma * int_0^R r^{N-1-s} dr for v = 1 on the boundary
    p = ProblemParams(N=3, s=0.5)
    grid = build_axi_grid(p, R=5.0, nz=12, nr=40, grading=1.2)
    v = np.ones(grid.shape)
    exact = p.sigma * 5.0 ** (p.N - p.s) / (p.N - p.s)
    assert trace_functional(grid, p, v, 2.0) == pytest.approx(exact,
                                                              rel=1e-13)


def test_dirichlet_energy_on_linear_field():
    # grad(z) = (1, 0): energy = sigma * int r^{N-1} dr * z_max
    p = ProblemParams(N=3, s=0.5)
    grid = build_axi_grid(p, R=4.0, nz=24, nr=24, grading=1.1)
    form = assemble_dirichlet_energy(grid, p)
    Z = np.repeat(grid.z_nodes[:, None], len(grid.r_nodes), axis=1)
    exact = p.sigma * 4.0 ** p.N / p.N * grid.z_nodes[-1]
    assert form.energy(Z.reshape(-1)) == pytest.approx(exact, rel=1e-12)
    assert form.energy(np.ones(np.prod(grid.shape))) == pytest.approx(
        0.0, abs=1e-10)


def test_solve_spd_matches_dense():
    rng = np.random.default_rng(7)
    n = 60
    M = rng.standard_normal((n, n))
    A = M @ M.T + n * np.eye(n)
    rhs = rng.standard_normal(n)
    form = SparseForm(matrix=sp.csr_matrix(A), descriptor="test")
    x = solve_spd(form, rhs, tol=1e-12)
    assert np.linalg.norm(A @ x - rhs) <= 1e-9 * np.linalg.norm(rhs)


def test_solve_spd_rejects_indefinite():
    A = sp.diags([1.0, -1.0, 1.0]).tocsr()
    with pytest.raises((IndefiniteFormError, ConvergenceError)):
        solve_spd(SparseForm(matrix=A, descriptor="indef"),
                  np.array([1.0, 1.0, 1.0]))
