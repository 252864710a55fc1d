"""Bounded-domain mesh, mixed quotient and blow-up diagnostics."""

import math

import numpy as np
import pytest

from hstrace.numerics import IndefiniteFormError, GridError, ProblemParams
from hstrace import domain as dm
from hstrace import geometry as ge
from hstrace.halfspace import SolverOptions


P35 = ProblemParams(N=3, s=0.5)
OPTS = SolverOptions(max_outer=3000, stall_rel=1e-12, stall_window=150)


def _mesh(surface=None, params=P35, R_omega=1.0, n_rho=32, n_theta=24,
          h=0.0, grading=1.10):
    surface = surface or ge.flat_surface(params.N, rho0=0.45 * R_omega)
    return dm.build_domain_mesh(surface, params, R_omega, n_rho, n_theta,
                                h=h, grading=grading)


def _const_minimizer(mesh):
    u = np.ones(mesh.n_nodes)
    return dm.MixedMinimizer(mesh=mesh, u=u, mu_value=0.0, lam=0.0,
                             norm_residual=0.0, el_interior=1.0,
                             el_flux=1.0, el_gamma1=0.0, iterations=0)


def test_mesh_rejects_patch_outside_domain():
    with pytest.raises(GridError):
        dm.build_domain_mesh(ge.flat_surface(3, rho0=2.0), P35, 1.0, 32, 24)


def test_boundary_tags_cover_and_interface_is_dirichlet():
    mesh = _mesh()
    assert mesh.gamma1.sum() > 0
    # the last bottom-curve node is the interface ring: Dirichlet wins
    assert mesh.gamma1[mesh.gamma2[-1]]
    assert not mesh.gamma1[mesh.gamma2[:-1]].any()


def test_flat_distance_is_radial():
    mesh = _mesh()
    assert np.allclose(mesh.d_values, mesh.nodes[mesh.gamma2, 1],
                       atol=1e-12)


def test_curved_distance_exceeds_chord_and_matches_delegate():
    surf = ge.sphere_surface(3, 2.0, rho0=0.45)
    mesh = _mesh(surface=surf)
    r = mesh.nodes[mesh.gamma2, 1]
    assert np.all(mesh.d_values[1:] > r[1:])
    # in-patch values agree with the geometry module to 1e-10
    inside = r <= surf.rho0
    expected = np.array([ge.boundary_geodesic_distance(surf, t)
                         for t in r[inside]])
    assert np.allclose(mesh.d_values[inside], expected, atol=1e-10)
    assert np.allclose(mesh.d_values[inside],
                       2.0 * np.arcsin(r[inside] / 2.0), atol=1e-10)


def test_half_mass_radius_constant_field_oracles():
    # oracle: r^{N-s} = 1/2 for u = 1 on the flat disc of radius 1
    for s, expected in [(0.0, 2.0 ** (-1.0 / 3.0)),
                        (0.5, 2.0 ** (-1.0 / 2.5))]:
        mesh = _mesh(params=ProblemParams(N=3, s=s))
        hm = dm.half_mass_radius(_const_minimizer(mesh))
        assert hm == pytest.approx(expected, rel=1e-12)


def test_half_mass_radius_rejects_zero_field():
    mesh = _mesh()
    mm = _const_minimizer(mesh)
    mm.u = np.zeros(mesh.n_nodes)
    with pytest.raises(Exception):
        dm.half_mass_radius(mm)


def test_coercivity_examples():
    assert dm.coercivity_margin(_mesh(h=1.0),
                                use_dirichlet_subspace=False) > 0.0
    assert dm.coercivity_margin(_mesh(h=0.0)) > 0.0
    assert dm.coercivity_margin(_mesh(h=-1000.0),
                                use_dirichlet_subspace=False) < 0.0


def test_compute_mu_refuses_indefinite_form():
    with pytest.raises(IndefiniteFormError):
        dm.compute_mu(_mesh(h=-1000.0), OPTS)


def test_quotient_homogeneity():
    from hstrace.expansion import quotient_of
    mesh = _mesh(h=-0.2)
    rng = np.random.default_rng(11)
    u = rng.random(mesh.n_nodes) + 0.1
    u[mesh.gamma1] = 0.0
    assert quotient_of(mesh, 7.3 * u) == pytest.approx(
        quotient_of(mesh, u), rel=1e-12)


def test_minimizer_structure_and_residuals():
    mesh = _mesh(h=-0.2, n_rho=48, n_theta=32)
    mm = dm.compute_mu(mesh, OPTS)
    el = dm.el_residual(mm)
    assert max(el) < 1e-3
    assert mm.el_gamma1 == 0.0
    assert np.all(mm.u[mesh.gamma1] == 0.0)
    assert np.all(mm.u[mesh.gamma2[:-1]] > 0.0)
    assert mm.norm_residual < 1e-10
    # quotient history is non-increasing by construction
    assert all(b <= a + 1e-12 for a, b in zip(mm.history, mm.history[1:]))


def test_radially_varying_potential_sampled_at_distance():
    mesh = _mesh(h=lambda d: -0.2 + d)
    assert mesh.h_values == pytest.approx(-0.2 + mesh.d_values, abs=1e-12)


def test_blowup_constant_field_scaling():
    mesh = _mesh()
    mm = _const_minimizer(mesh)
    r_n = 0.05
    _, _, wn, _, _ = dm.blowup_rescale(mm, mesh.surface, r_n)
    inner = wn[:10, :10]  # away from the Gamma1 cut-off region
    assert np.allclose(inner, r_n ** 1.0, atol=1e-12)


def test_blowup_halfmass_qmass(gs35):
    surf = ge.flat_surface(3, rho0=0.9)
    mesh = dm.build_domain_mesh(surf, P35, 2.0, 64, 48, h=-0.2,
                                grading=1.10)
    mm = dm.compute_mu(mesh, OPTS)
    hm = dm.half_mass_radius(mm)
    _, _, _, qmass, _ = dm.blowup_rescale(mm, surf, hm)
    assert qmass == pytest.approx(0.5, abs=0.1)
    # at patch scale the rescaled profile resembles the half-space
    # ground state
    _, _, _, _, rel = dm.blowup_rescale(mm, surf, 0.9, gs=gs35)
    assert rel < 0.2


def test_criterion_report_algebra():
    rep = dm.CriterionReport(N=3, s=0.5, c_value=0.3, H0=-1.0, h0=0.1,
                             mu_value=1.5, S_value=1.6)
    assert rep.lhs == pytest.approx(-0.2)
    assert rep.satisfied
    assert rep.gap == pytest.approx(0.1)
    rep2 = dm.CriterionReport(N=3, s=0.5, c_value=0.3, H0=0.0, h0=1.0,
                              mu_value=1.6, S_value=1.6)
    assert not rep2.satisfied
