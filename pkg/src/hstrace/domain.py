"""Mixed trace quotient on bounded axisymmetric domains.

The domain is a deformed half-ball in R^{N+1}: the generatrix in the
(z, r) half-plane is bounded below by the surface graph z = phi(r)
(boundary part Gamma2, carrying the weighted nonlinear flux condition),
outside by the spherical arc of radius R_omega (Gamma1, homogeneous
Dirichlet) and on the left by the symmetry axis. P1 triangles on a
polar fan graded toward the singular origin.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy import linalg as dla
from scipy import optimize
from scipy.interpolate import LinearNDInterpolator, RegularGridInterpolator

from .numerics import (GridError, ConvergenceError, IndefiniteFormError,
                       ProblemParams, cell_masses, graded_nodes, hat_weights)
from .geometry import BoundarySurface, boundary_geodesic_distance, ChartError
from .halfspace import GroundState, SolverOptions


def _bottom_radial(surface: BoundarySurface, rho: float) -> float:
    """r-coordinate of the bottom-curve point at polar radius rho."""
    if rho == 0.0:
        return 0.0

    def g(r):
        return r * r + float(surface.phi(r)) ** 2 - rho * rho

    hi = rho
    while g(hi) < 0:
        hi *= 1.0 + 1e-12  # phi >= 0 profiles keep the root at r <= rho
        break
    return float(optimize.brentq(g, 0.0, rho * (1.0 + 1e-12)))


def _meridian_length(surface: BoundarySurface, r: float) -> float:
    """Arclength of the bottom curve up to radial coordinate r.

    Same integral as boundary_geodesic_distance but without the patch
    radius guard: the mesh bottom may extend beyond the chart patch.
    """
    if surface.kind == "flat" or r == 0.0:
        return float(r)
    if surface.kind == "sphere":
        return surface.param * math.asin(min(r / surface.param, 1.0))
    from scipy import integrate
    val, _ = integrate.quad(
        lambda t: math.sqrt(1.0 + float(surface.dphi(t)) ** 2), 0.0, r)
    return float(val)


@dataclass
class DomainMesh:
    """Triangulated generatrix with boundary tags and quadrature data."""

    surface: BoundarySurface
    params: ProblemParams
    R_omega: float
    nodes: np.ndarray          # (n, 2) columns (z, r)
    triangles: np.ndarray      # (m, 3) vertex indices
    gamma1: np.ndarray         # boolean mask, Dirichlet nodes
    gamma2: np.ndarray         # ordered node indices along the bottom curve
    d_values: np.ndarray       # geodesic boundary distance at gamma2 nodes
    h_values: np.ndarray       # potential sampled at gamma2 nodes
    d_sub: np.ndarray          # subdivided boundary quadrature nodes
    trace_sub: np.ndarray      # subnode weights for int_{Gamma2} d^{-s} |u|^q
    interp: sp.csr_matrix      # (n_sub, n_nodes) linear boundary interpolation
    hform: sp.csr_matrix       # quadratic form int_{Gamma2} h u^2 dS
    stiffness: sp.csr_matrix
    vol_lumped: np.ndarray     # lumped diagonal of sigma int r^{N-1} u^2

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)


def build_domain_mesh(surface: BoundarySurface, params: ProblemParams,
                      R_omega: float, n_rho: int = 64, n_theta: int = 40,
                      h=0.0, grading: float = 1.08) -> DomainMesh:
    """Polar-fan mesh of the generatrix, graded toward the origin.

    Node rings sit at polar radii rho_i (geometrically graded toward 0);
    along each ring the angle runs from the axis to the bottom curve.
    h may be a constant or a callable of the geodesic distance d.
    """
    if surface.rho0 >= R_omega:
        raise GridError("surface patch radius must be below R_omega")
    if n_rho < 8 or n_theta < 8:
        raise GridError("n_rho and n_theta must be >= 8")
    N = params.N
    if surface.N != N:
        raise GridError("surface dimension does not match params.N")

    rho = graded_nodes(R_omega, n_rho, grading)
    eta = np.linspace(0.0, 1.0, n_theta)

    # bottom curve in polar form
    r_bot = np.array([_bottom_radial(surface, p) for p in rho])
    theta_bot = np.where(rho > 0,
                         np.arctan2(r_bot, surface.phi(r_bot)), 0.0)

    n_nodes = 1 + (n_rho - 1) * n_theta
    nodes = np.zeros((n_nodes, 2))

    def nid(i, j):
        return 1 + (i - 1) * n_theta + j

    for i in range(1, n_rho):
        th = eta * theta_bot[i]
        nodes[nid(i, 0):nid(i, n_theta - 1) + 1, 0] = rho[i] * np.cos(th)
        nodes[nid(i, 0):nid(i, n_theta - 1) + 1, 1] = rho[i] * np.sin(th)

    tris = []
    for j in range(n_theta - 1):  # fan around the origin
        tris.append((0, nid(1, j), nid(1, j + 1)))
    for i in range(1, n_rho - 1):
        for j in range(n_theta - 1):
            a, b = nid(i, j), nid(i, j + 1)
            c, d_ = nid(i + 1, j), nid(i + 1, j + 1)
            tris.append((a, c, d_))
            tris.append((a, d_, b))
    triangles = np.asarray(tris, dtype=np.int64)

    gamma1 = np.zeros(n_nodes, dtype=bool)
    gamma1[nid(n_rho - 1, 0):] = True  # outer arc, Dirichlet wins at the ring

    gamma2 = np.concatenate(([0], [nid(i, n_theta - 1)
                                   for i in range(1, n_rho)]))
    d_values = np.array([_meridian_length(surface, nodes[k, 1])
                         for k in gamma2])
    d_values[0] = 0.0

    if callable(h):
        h_values = np.array([float(h(d)) for d in d_values])
    else:
        h_values = np.full(len(gamma2), float(h))

    sigma = params.sigma
    r_values = nodes[gamma2, 1]
    # Boundary quadrature on subdivided cells: evaluating the P1 field
    # between nodes keeps the convexity error of |u|^q small, so spiky
    # iterates are not artificially rewarded by the trace functional.
    ksub = 6
    frac = np.linspace(0.0, 1.0, ksub + 1)[:-1]
    d_sub = np.concatenate([(d_values[k] + frac * (d_values[k + 1]
                                                   - d_values[k]))
                            for k in range(len(gamma2) - 1)]
                           + [d_values[-1:]])
    r_sub = np.interp(d_sub, d_values, r_values)
    with np.errstate(divide="ignore", invalid="ignore"):
        corr_sub = np.where(d_sub > 0,
                            (r_sub / np.maximum(d_sub, 1e-300)) ** (N - 1),
                            1.0)
    trace_sub = sigma * hat_weights(d_sub, N - 1.0 - params.s) * corr_sub
    hw_sub = sigma * hat_weights(d_sub, N - 1.0) * corr_sub
    h_sub = np.interp(d_sub, d_values, h_values)

    # sparse interpolation: subnode value from its two parent nodes
    n_nodes = len(nodes)
    rows, cols, vals = [], [], []
    for m, dv in enumerate(d_sub):
        k = min(int(np.searchsorted(d_values, dv, side="right")),
                len(gamma2) - 1)
        t = (dv - d_values[k - 1]) / (d_values[k] - d_values[k - 1])
        rows.extend((m, m))
        cols.extend((gamma2[k - 1], gamma2[k]))
        vals.extend((1.0 - t, t))
    interp = sp.coo_matrix((vals, (rows, cols)),
                           shape=(len(d_sub), n_nodes)).tocsr()
    hform = (interp.T @ sp.diags(hw_sub * h_sub) @ interp).tocsr()

    stiffness, vol_lumped = _assemble_p1(nodes, triangles, sigma, N)

    return DomainMesh(surface=surface, params=params, R_omega=R_omega,
                      nodes=nodes, triangles=triangles, gamma1=gamma1,
                      gamma2=gamma2, d_values=d_values, h_values=h_values,
                      d_sub=d_sub, trace_sub=trace_sub, interp=interp,
                      hform=hform, stiffness=stiffness,
                      vol_lumped=vol_lumped)


def _assemble_p1(nodes, triangles, sigma, N):
    """P1 stiffness for sigma int r^{N-1} |grad u|^2 and lumped mass."""
    z = nodes[:, 0]
    r = nodes[:, 1]
    n = len(nodes)
    a, b, c = triangles.T
    za, zb, zc = z[a], z[b], z[c]
    ra, rb, rc = r[a], r[b], r[c]
    det = (zb - za) * (rc - ra) - (zc - za) * (rb - ra)
    area = 0.5 * np.abs(det)
    if np.any(area <= 0):
        raise GridError("degenerate mesh cell")
    # gradients of the barycentric shape functions
    gz = np.stack([(rb - rc), (rc - ra), (ra - rb)]) / det
    gr = np.stack([(zc - zb), (za - zc), (zb - za)]) / det
    # degree-5 rule for the radial weight: exact for r^{N-1} with N <= 6,
    # so the P1 energy carries no quadrature error (spikes not underpriced)
    bary = [((1 / 3, 1 / 3, 1 / 3), 9.0 / 40.0)]
    a1, w1 = 0.0597158717897698, 0.1323941527885062
    a2, w2 = 0.7974269853530873, 0.1259391805448271
    for a_, w_ in ((a1, w1), (a2, w2)):
        b_ = (1.0 - a_) / 2.0
        bary += [((a_, b_, b_), w_), ((b_, a_, b_), w_), ((b_, b_, a_), w_)]
    rm = np.zeros(len(a))
    for (la, lb, lc), w_ in bary:
        rm += w_ * (la * ra + lb * rb + lc * rc) ** (N - 1)
    wt = sigma * area * rm

    rows, cols, vals = [], [], []
    vidx = [a, b, c]
    for p in range(3):
        for qq in range(3):
            rows.append(vidx[p])
            cols.append(vidx[qq])
            vals.append(wt * (gz[p] * gz[qq] + gr[p] * gr[qq]))
    K = sp.coo_matrix((np.concatenate(vals),
                       (np.concatenate(rows), np.concatenate(cols))),
                      shape=(n, n)).tocsr()
    lumped = np.zeros(n)
    for p in range(3):
        np.add.at(lumped, vidx[p], wt / 3.0)
    return K, lumped


def _free_map(mesh: DomainMesh) -> sp.csr_matrix:
    """Prolongation from free unknowns to all nodes (Gamma1 eliminated)."""
    free = np.flatnonzero(~mesh.gamma1)
    n = mesh.n_nodes
    P = sp.coo_matrix((np.ones(len(free)), (free, np.arange(len(free)))),
                      shape=(n, len(free)))
    return P.tocsr()


def _quadratic_form(mesh: DomainMesh) -> sp.csr_matrix:
    """K plus the Gamma2 potential term int h u^2 dS."""
    return (mesh.stiffness + mesh.hform).tocsr()


def coercivity_margin(mesh: DomainMesh,
                      use_dirichlet_subspace: bool = True) -> float:
    """Smallest eigenvalue of (K + h-term) against the H1 Gram form.

    Positive margin certifies coercivity of the quadratic part on the
    chosen subspace. Small pencils go through a dense generalized
    eigensolve; larger ones through shift-inverted Lanczos, with the
    shift placed below a provable lower bound so the shifted operator
    stays definite.
    """
    Q = _quadratic_form(mesh)
    G = (mesh.stiffness + sp.diags(mesh.vol_lumped)).tocsr()
    if use_dirichlet_subspace:
        P = _free_map(mesh)
        Q = (P.T @ Q @ P).tocsr()
        G = (P.T @ G @ P).tocsr()
    n = Q.shape[0]
    if n <= 2500:
        vals = dla.eigh(Q.toarray(), G.toarray(), subset_by_index=[0, 0],
                        eigvals_only=True)
        return float(vals[0])

    # lower bound: u'Qu >= u'Gu - u'M_v u - hmax * u'M_tr u with
    # M_v <= G, so lambda_min >= -hmax * lambda_max(G^{-1} M_tr).
    N = mesh.params.N
    r_sub = mesh.interp @ mesh.nodes[:, 1]
    with np.errstate(divide="ignore", invalid="ignore"):
        corr = np.where(mesh.d_sub > 0,
                        (r_sub / np.maximum(mesh.d_sub, 1e-300)) ** (N - 1),
                        1.0)
    hw_sub = mesh.params.sigma * hat_weights(mesh.d_sub, N - 1.0) * corr
    Mtr = mesh.interp.T @ sp.diags(hw_sub) @ mesh.interp
    if use_dirichlet_subspace:
        Mtr = (P.T @ Mtr @ P).tocsr()
    h_sub = np.interp(mesh.d_sub, mesh.d_values, mesh.h_values)
    hmax = max(0.0, float(-h_sub.min()))
    solve_g = spla.splu(G.tocsc()).solve
    v = np.ones(n) / math.sqrt(n)
    beta = 1.0
    for _ in range(30):  # power iteration on the pencil (M_tr, G)
        w = solve_g(Mtr @ v)
        beta = float(np.linalg.norm(w))
        if beta == 0.0:
            break
        v = w / beta
    sigma_shift = -hmax * 2.0 * beta - 0.1
    vals = spla.eigsh(Q, k=1, M=G, sigma=sigma_shift, which="LM",
                      v0=np.ones(n) / math.sqrt(n),
                      return_eigenvectors=False)
    return float(vals[0])


@dataclass
class MixedMinimizer:
    """Converged minimizer of the mixed quotient on a DomainMesh."""

    mesh: DomainMesh
    u: np.ndarray
    mu_value: float
    lam: float
    norm_residual: float
    el_interior: float
    el_flux: float
    el_gamma1: float
    iterations: int
    history: list = field(default_factory=list)


def _trace_value(mesh: DomainMesh, u: np.ndarray, t: float) -> float:
    usub = np.abs(mesh.interp @ u)
    return float(np.sum(mesh.trace_sub * usub ** t))


def _trace_gradient(mesh: DomainMesh, u: np.ndarray, q: float) -> np.ndarray:
    """d/du of the Gamma2 q-functional divided by q (the EL forcing)."""
    usub = mesh.interp @ u
    return mesh.interp.T @ (mesh.trace_sub * np.abs(usub) ** (q - 1.0)
                            * np.sign(usub))


def compute_mu(mesh: DomainMesh, opts: SolverOptions | None = None,
               check_coercivity: bool = True,
               use_dirichlet_subspace: bool = True,
               u0: np.ndarray | None = None) -> MixedMinimizer:
    """Minimize the mixed quotient by normalized fixed-point descent.

    Same scheme as the half-space solver: with the Gamma2 functional
    held at 1, the update solves Q y = trace-nonlinearity, then a
    backtracking line search on the mixing parameter keeps the quotient
    non-increasing. Refuses to run when the form is not coercive.
    """
    # concentration toward the origin creeps slowly, so the domain solver
    # defaults to a long run with a wide stall window
    opts = opts or SolverOptions(max_outer=4000, stall_rel=1e-11,
                                 stall_window=100)
    params = mesh.params
    q = params.q
    if check_coercivity:
        margin = coercivity_margin(mesh, use_dirichlet_subspace)
        if margin <= 0:
            raise IndefiniteFormError(
                f"quadratic form not coercive (margin {margin:.3e})")
    Q = _quadratic_form(mesh)
    P = _free_map(mesh) if use_dirichlet_subspace else sp.identity(
        mesh.n_nodes, format="csr")
    Qr = (P.T @ Q @ P).tocsc()
    solve = spla.factorized(Qr)

    if u0 is not None:
        # warm start, e.g. a coarse-mesh minimizer interpolated here
        u = np.maximum(np.nan_to_num(np.asarray(u0, dtype=float)), 0.0)
    else:
        # bubble-shaped start concentrated a few rings above the mesh scale
        rho = np.hypot(mesh.nodes[:, 0], mesh.nodes[:, 1])
        ring1 = np.partition(np.unique(rho), 1)[1]
        a = 10.0 * ring1
        u = (a * a + rho * rho) ** (-(params.N - 1) / 2.0)
    u[mesh.gamma1] = 0.0

    def normalize(v):
        T = _trace_value(mesh, v, q)
        if T <= 0:
            raise ConvergenceError("trace functional vanished")
        return v / T ** (1.0 / q)

    def quotient(v):
        return float(v @ (Q @ v))  # trace already normalized to 1

    u = normalize(u)
    Ju = quotient(u)
    history = [Ju]
    it = 0
    for it in range(1, opts.max_outer + 1):
        bfull = _trace_gradient(mesh, u, q)
        y = P @ solve(P.T @ bfull)
        y = np.maximum(y, 0.0)
        alpha = 1.0
        accepted = False
        while alpha >= opts.min_alpha:
            cand = normalize((1.0 - alpha) * u + alpha * y)
            Jc = quotient(cand)
            if Jc <= Ju + 1e-12:
                accepted = True
                break
            alpha *= 0.5
        if not accepted:
            break
        u, Ju = cand, Jc
        history.append(Ju)
        w = opts.stall_window
        if len(history) > w and \
                history[-w - 1] - history[-1] < opts.stall_rel * abs(Ju):
            break

    u = normalize(u)
    T = _trace_value(mesh, u, q)
    mu = quotient(u)
    lam = mu / T ** (2.0 / q - 1.0)

    el_int, el_flux, el_g1 = _el_residuals(mesh, Q, P, u, lam, q)
    return MixedMinimizer(mesh=mesh, u=u, mu_value=mu, lam=lam,
                          norm_residual=abs(T - 1.0),
                          el_interior=el_int, el_flux=el_flux,
                          el_gamma1=el_g1, iterations=it, history=history)


def _el_residuals(mesh, Q, P, u, lam, q):
    """Weighted relative residuals of the discrete Euler-Lagrange system."""
    bfull = _trace_gradient(mesh, u, q)
    res = P.T @ (Q @ u - lam * bfull)
    ref = max(float(np.linalg.norm(P.T @ (Q @ u))), 1e-300)
    free = np.flatnonzero(np.asarray(P.sum(axis=1)).ravel() > 0)
    on_g2 = np.zeros(mesh.n_nodes, dtype=bool)
    on_g2[mesh.gamma2] = True
    g2_free = on_g2[free]
    el_flux = float(np.linalg.norm(res[g2_free])) / ref
    el_int = float(np.linalg.norm(res[~g2_free])) / ref
    el_g1 = float(np.linalg.norm(u[mesh.gamma1]))
    return el_int, el_flux, el_g1


def el_residual(minimizer: MixedMinimizer):
    """(interior, Gamma2 flux, Gamma1 trace) residual triple."""
    return (minimizer.el_interior, minimizer.el_flux, minimizer.el_gamma1)


def half_mass_radius(minimizer: MixedMinimizer) -> float:
    """Geodesic radius containing half the Gamma2 weighted q-mass.

    Interpolates the discrete cumulative in the d^{N-s} variable, which
    makes the answer exact for fields constant near the crossing.
    """
    mesh = minimizer.mesh
    params = mesh.params
    uq = np.abs(minimizer.u[mesh.gamma2]) ** params.q
    d = mesh.d_values
    corr_mid = 0.5 * (np.r_[1.0, (mesh.nodes[mesh.gamma2[1:], 1]
                                  / np.maximum(d[1:], 1e-300))
                      ** (params.N - 1)][:-1]
                      + (mesh.nodes[mesh.gamma2[1:], 1]
                         / np.maximum(d[1:], 1e-300)) ** (params.N - 1))
    cells = params.sigma * cell_masses(d, params.N - 1.0 - params.s) * corr_mid
    contrib = cells * 0.5 * (uq[:-1] + uq[1:])
    total = contrib.sum()
    if total <= 0:
        raise ConvergenceError("zero field has no half-mass radius")
    cum = np.r_[0.0, np.cumsum(contrib)]
    target = 0.5 * total
    k = int(np.searchsorted(cum, target))  # crossing cell index k-1
    p = params.N - params.s
    d0, d1 = d[k - 1], d[k]
    frac = (target - cum[k - 1]) / max(cum[k] - cum[k - 1], 1e-300)
    return float((d0 ** p + frac * (d1 ** p - d0 ** p)) ** (1.0 / p))


def blowup_rescale(minimizer: MixedMinimizer, surface: BoundarySurface,
                   r_n: float, gs: GroundState | None = None,
                   extent: float = 4.0, n_ref: int = 48):
    """Rescaled field w_n(zeta) = r_n^{(N-1)/2} u(F(r_n zeta)).

    Pulls the minimizer back through the Fermi chart at scale r_n onto
    a uniform reference quarter-plane grid. Returns (zeta_z, zeta_r,
    w_n, unit_ball_qmass, rel_l2_to_gs); the last entry is None unless
    a half-space ground state is supplied for comparison.
    """
    from .geometry import fermi_chart
    mesh = minimizer.mesh
    params = mesh.params
    N = params.N
    lim_n = 0.45 / max(abs(surface.H0), 1e-12) / r_n
    lim_t = surface.rho0 / r_n
    ext_z = min(extent, lim_n)
    ext_r = min(extent, lim_t)
    if ext_z <= 0 or ext_r <= 0:
        raise ChartError("r_n too large for the chart")
    zeta_z = np.linspace(0.0, ext_z, n_ref)
    zeta_r = np.linspace(0.0, ext_r, n_ref)

    interp = LinearNDInterpolator(mesh.nodes, minimizer.u, fill_value=0.0)
    wn = np.zeros((n_ref, n_ref))
    y = np.zeros(N + 1)
    for i, zz in enumerate(zeta_z):
        for j, rr in enumerate(zeta_r):
            y[:] = 0.0
            y[0] = r_n * zz
            y[1] = r_n * rr
            pt = fermi_chart(surface, y)
            wn[i, j] = interp(pt[0], float(np.hypot(*pt[1:3]))
                              if N >= 2 else abs(pt[1]))
    wn *= r_n ** ((N - 1) / 2.0)

    # q-mass of the rescaled trace inside the unit ball
    mask = zeta_r <= 1.0
    tw = params.sigma * hat_weights(zeta_r[mask], N - 1.0 - params.s)
    qmass = float(np.sum(tw * np.abs(wn[0, mask]) ** params.q))

    rel = None
    if gs is not None:
        gi = RegularGridInterpolator((gs.grid.z_nodes, gs.grid.r_nodes),
                                     gs.w, bounds_error=False, fill_value=0.0)
        pts = np.stack(np.meshgrid(zeta_z, zeta_r, indexing="ij"), axis=-1)
        wg = gi(pts.reshape(-1, 2)).reshape(n_ref, n_ref)
        num = np.linalg.norm(wn - wg)
        den = max(np.linalg.norm(wg), 1e-300)
        rel = float(num / den)
    return zeta_z, zeta_r, wn, qmass, rel


@dataclass
class CriterionReport:
    """Curvature criterion versus the computed gap for one case."""

    N: int
    s: float
    c_value: float
    H0: float
    h0: float
    mu_value: float
    S_value: float

    @property
    def lhs(self) -> float:
        return self.c_value * self.H0 + self.h0

    @property
    def satisfied(self) -> bool:
        return self.lhs < 0

    @property
    def gap(self) -> float:
        return self.S_value - self.mu_value
