"""Boundary surfaces, curvature, Fermi chart and metric expansion."""

import math

import numpy as np
import pytest

from hstrace import geometry as ge


def test_mean_curvature_closed_forms():
    # oracle: sum of principal curvatures with the interior normal
    # pointing into z > phi; sphere cap of radius rho: H0 = -N / rho,
    # paraboloid phi = kappa t^2 / 2: H0 = -N kappa, flat: 0
    assert ge.flat_surface(3).H0 == 0.0
    assert ge.sphere_surface(3, 2.0).H0 == pytest.approx(-1.5, abs=1e-12)
    assert ge.paraboloid_surface(3, 0.5).H0 == pytest.approx(-1.5, abs=1e-12)
    assert ge.paraboloid_surface(4, 0.25).H0 == pytest.approx(-1.0,
                                                              abs=1e-12)


def test_orientation_flip_negates_curvature():
    surf = ge.paraboloid_surface(3, 0.5)
    assert surf.flipped().H0 == pytest.approx(-surf.H0, abs=1e-14)


def test_mean_curvature_fd_crosscheck():
    for surf in (ge.sphere_surface(3, 1.7), ge.paraboloid_surface(5, 0.3)):
        assert ge.mean_curvature_at_origin(surf) == pytest.approx(
            surf.H0, abs=1e-6)


def test_geodesic_distance_closed_forms():
    # flat: d = rho; sphere: d = rho_s * arcsin(rho / rho_s)
    flat = ge.flat_surface(3, rho0=1.0)
    assert ge.boundary_geodesic_distance(flat, 0.5) == 0.5
    cap = ge.sphere_surface(3, 2.0, rho0=1.5)
    assert ge.boundary_geodesic_distance(cap, 1.0) == pytest.approx(
        2.0 * math.asin(0.5), rel=1e-12)
    para = ge.paraboloid_surface(3, 0.5, rho0=1.0)
    assert ge.boundary_geodesic_distance(para, 0.8) > 0.8  # arclength > chord
    with pytest.raises(ge.ChartError):
        ge.boundary_geodesic_distance(flat, 1.5)


def test_meridian_point_inverts_distance():
    surf = ge.paraboloid_surface(3, 0.7, rho0=1.0)
    rho = 0.6
    d = ge.boundary_geodesic_distance(surf, rho)
    assert ge.meridian_point(surf, d) == pytest.approx(rho, abs=1e-9)


def test_fermi_chart_flat_is_identity():
    surf = ge.flat_surface(3, rho0=1.0)
    y = np.array([0.2, 0.3, -0.1, 0.05])
    F = ge.fermi_chart(surf, y)
    # flat: boundary exponential is the identity, normal is -e_z... the
    # chart must reproduce (z, x) = (y1, y_tilde) up to the normal sign
    assert F[1:] == pytest.approx(y[1:], abs=1e-12)
    assert abs(F[0]) == pytest.approx(0.2, abs=1e-12)


def test_fermi_chart_sphere_matches_explicit_cap():
    # point on a sphere cap: arclength d from the pole along a meridian
    # sits at angle d / rho_s; checked through the chart at y1 = 0
    rho_s = 2.0
    surf = ge.sphere_surface(3, rho_s, rho0=1.5)
    d = 0.9
    y = np.zeros(4)
    y[1] = d
    F = ge.fermi_chart(surf, y)
    ang = d / rho_s
    assert F[1] == pytest.approx(rho_s * math.sin(ang), rel=1e-9)
    assert F[0] == pytest.approx(rho_s * (1.0 - math.cos(ang)), rel=1e-9)


def test_fermi_chart_rejects_out_of_patch():
    surf = ge.sphere_surface(3, 2.0, rho0=1.0)
    with pytest.raises(ge.ChartError):
        ge.fermi_chart(surf, np.array([0.0, 1.5, 0.0, 0.0]))
    with pytest.raises(ge.ChartError):
        # |y1| * |H0| >= 1/2 may fold the chart
        ge.fermi_chart(surf, np.array([0.5, 0.1, 0.0, 0.0]))


def test_metric_normal_rows_exact():
    surf = ge.paraboloid_surface(3, 0.5, rho0=1.0)
    ms = ge.metric_sample(surf, np.array([0.05, 0.1, -0.07, 0.02]))
    assert ms.g[0, 0] == pytest.approx(1.0, abs=1e-10)
    assert np.abs(ms.g[1:, 0]).max() < 1e-10


def test_metric_taylor_second_order():
    radii = [0.02, 0.04, 0.08]
    for surf in (ge.sphere_surface(3, 2.0, rho0=0.9),
                 ge.paraboloid_surface(3, 0.5, rho0=0.9)):
        rep = ge.metric_taylor_check(surf, radii)
        assert rep.tangential_slope >= 2.0
        assert rep.max_normal_defect < 1e-8
        # fitted first-order coefficient matches twice the shape entry
        assert rep.first_order_coeff == pytest.approx(rep.shape_coeff,
                                                      rel=0.05)


def test_metric_taylor_flat_remainder_vanishes():
    rep = ge.metric_taylor_check(ge.flat_surface(3, rho0=1.0),
                                 [0.02, 0.04, 0.08])
    assert max(rep.residuals) < 1e-13
    assert rep.max_normal_defect < 1e-12
