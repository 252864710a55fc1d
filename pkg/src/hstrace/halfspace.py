"""Half-space ground state, best trace constant and curvature integrals.

Minimizes the Rayleigh quotient E(v) / T_q(v)^{2/q} over the truncated
quarter-plane by a monotone line-searched fixed-point descent, warm-started
from the explicit s=0 bubble U(z, r) = ((1+z)^2 + r^2)^{-(N-1)/2}.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .numerics import (AxiGrid, ConvergenceError, ProblemParams, SparseForm,
                       assemble_dirichlet_energy, build_axi_grid,
                       cell_masses, hat_weights, trace_functional)


@dataclass
class SolverOptions:
    max_outer: int = 2000
    stall_rel: float = 1e-9
    stall_window: int = 20
    el_tol: float = 1e-4
    closure: str = "dirichlet"  # "dirichlet" or "robin" (decay-matched)
    lin_tol: float = 1e-11
    min_alpha: float = 1e-4


@dataclass
class GroundState:
    params: ProblemParams
    grid: AxiGrid
    w: np.ndarray                # (nz, nr), trace-normalized
    S_value: float
    A: float                     # int z1 |grad w|^2
    B: float                     # int z1 |dw/dz1|^2
    norm_residual: float
    lam: float                   # discrete Euler-Lagrange multiplier
    el_residual: float
    iterations: int
    history: list = field(default_factory=list, repr=False)


@dataclass(frozen=True)
class CriterionCoefficient:
    """Coefficient multiplying the mean curvature in the existence criterion."""

    c_value: float
    N: int
    s: float
    A: float
    B: float


def bubble_profile(params: ProblemParams, Z: np.ndarray, R: np.ndarray) -> np.ndarray:
    """Explicit s=0 extremal ((1+z)^2 + r^2)^{-(N-1)/2}, used as warm start."""
    return ((1.0 + Z) ** 2 + R**2) ** (-(params.N - 1) / 2.0)


def _outer_robin_weights(grid: AxiGrid, params: ProblemParams) -> np.ndarray:
    """Diagonal boundary mass implementing dw/dn + (N-1)/|z| w = 0 at truncation.

    Matched to the decay law w ~ |z|^{1-N}; keeps the energy form SPD.
    """
    nz, nr = grid.shape
    sigma = params.sigma
    w = np.zeros((nz, nr))
    zb, rb = grid.z_nodes[-1], grid.r_nodes[-1]
    # side r = R_trunc: measure sigma R^{N-1} dz
    dz = np.diff(grid.z_nodes)
    wz = np.zeros(nz)
    wz[:-1] += 0.5 * dz
    wz[1:] += 0.5 * dz
    norm_r = np.hypot(grid.z_nodes, rb)
    w[:, -1] += sigma * rb ** (params.N - 1.0) * wz * (params.N - 1.0) / norm_r
    # side z = z_max: measure sigma r^{N-1} dr
    wr = sigma * hat_weights(grid.r_nodes, params.N - 1.0)
    norm_z = np.hypot(zb, grid.r_nodes)
    w[-1, :] += wr * (params.N - 1.0) / norm_z
    return w


def _constraint_map(nz: int, nr: int, dirichlet: np.ndarray) -> sp.csr_matrix:
    """Prolongation from reduced unknowns to the full grid.

    Ties the axis column (j=0) to its neighbor (j=1) and drops Dirichlet
    nodes; full = P @ reduced.
    """
    rep = -np.ones((nz, nr), dtype=np.int64)
    count = 0
    for i in range(nz):
        for j in range(1, nr):
            if not dirichlet[i, j]:
                rep[i, j] = count
                count += 1
    for i in range(nz):
        if not dirichlet[i, 0]:
            rep[i, 0] = rep[i, 1]
    rows = np.flatnonzero(rep.reshape(-1) >= 0)
    cols = rep.reshape(-1)[rows]
    data = np.ones(len(rows))
    return sp.csr_matrix((data, (rows, cols)), shape=(nz * nr, count))


def compute_ground_state(params: ProblemParams, grid: AxiGrid,
                         opts: SolverOptions | None = None) -> GroundState:
    """Minimize the discrete half-space trace quotient; returns the ground state.

    The quotient is non-increasing across iterations by construction
    (backtracking on the fixed-point direction).  The returned field is
    rescaled so that the weighted trace functional equals 1, making
    S_value the Dirichlet energy of w and lam its multiplier.
    """
    opts = opts or SolverOptions()
    nz, nr = grid.shape
    n = nz * nr
    q = params.q

    Q = assemble_dirichlet_energy(grid, params).matrix.tolil()
    dirichlet = np.zeros((nz, nr), dtype=bool)
    if opts.closure == "robin":
        robin = _outer_robin_weights(grid, params).reshape(-1)
        Q.setdiag(Q.diagonal() + robin)
    elif opts.closure == "dirichlet":
        dirichlet[-1, :] = True
        dirichlet[:, -1] = True
    else:
        raise ValueError(f"unknown closure {opts.closure!r}")
    Q = Q.tocsr()

    # constraint map: axis column tied to its neighbor (regularity dw/dr = 0
    # at r = 0), truncation nodes eliminated for the Dirichlet closure
    P = _constraint_map(nz, nr, dirichlet)
    Qr = (P.T @ Q @ P).tocsc()
    solve = spla.factorized(Qr)

    tw = grid.trace_weights
    free = ~dirichlet
    Z, Rm = np.meshgrid(grid.z_nodes, grid.r_nodes, indexing="ij")
    v = bubble_profile(params, Z, Rm)
    v[:, 0] = v[:, 1]
    v[dirichlet] = 0.0

    def tq(u):
        return float(np.sum(tw * np.abs(u[0, :]) ** q))

    def energy(u):
        x = u.reshape(-1)
        return float(x @ (Q @ x))

    def quotient(u):
        return energy(u) / tq(u) ** (2.0 / q)

    def normalize(u):
        return u / tq(u) ** (1.0 / q)

    v = normalize(v)
    Jv = quotient(v)
    history = [(0, Jv, np.nan, np.nan)]
    y_prev = None

    it = 0
    for it in range(1, opts.max_outer + 1):
        # fixed-point direction: harmonic extension of the boundary term
        b = np.zeros((nz, nr))
        b[0, :] = tw * np.abs(v[0, :]) ** (q - 1.0)
        yr = solve(P.T @ b.reshape(-1))
        y = (P @ yr).reshape(nz, nr)
        y = np.maximum(y, 0.0)
        ty = tq(y)
        if ty <= 0.0:
            raise ConvergenceError("iterate collapsed to zero field; "
                                   "grid or truncation radius too small")
        y = y / ty ** (1.0 / q)
        y_prev = y

        alpha = 1.0
        accepted = False
        while alpha >= opts.min_alpha:
            cand = np.maximum((1.0 - alpha) * v + alpha * y, 0.0)
            tc = tq(cand)
            if tc > 0.0:
                cand = cand / tc ** (1.0 / q)
                Jc = quotient(cand)
                if Jc <= Jv + 1e-12:
                    accepted = True
                    break
            alpha *= 0.5
        if not accepted:
            break
        v, Jv = cand, Jc
        history.append((it, Jv, np.nan, np.nan))

        if len(history) > opts.stall_window:
            J_old = history[-1 - opts.stall_window][1]
            if abs(J_old - Jv) <= opts.stall_rel * abs(Jv):
                break

    # final normalization and diagnostics
    v = normalize(v)
    E = energy(v)
    T = tq(v)
    lam = E / T
    S_value = E
    norm_residual = abs(T - 1.0)

    g = Q @ v.reshape(-1)
    bterm = np.zeros((nz, nr))
    bterm[0, :] = tw * np.abs(v[0, :]) ** (q - 1.0)
    res = P.T @ (g - lam * bterm.reshape(-1))
    el_residual = float(np.linalg.norm(res) /
                        max(np.linalg.norm(P.T @ g), 1e-300))

    A, B = curvature_integrals(grid, params, v)
    gs = GroundState(params=params, grid=grid, w=v, S_value=S_value, A=A, B=B,
                     norm_residual=norm_residual, lam=lam,
                     el_residual=el_residual, iterations=it, history=history)
    return gs


def curvature_integrals(grid: AxiGrid, params: ProblemParams,
                        w: np.ndarray) -> tuple[float, float]:
    """A = sigma int z r^{N-1} |grad w|^2, B = same with only the z-derivative.

    Same cell rule as the energy form, z weighted at cell centers.
    """
    nz, nr = grid.shape
    dz = np.diff(grid.z_nodes)
    dr = np.diff(grid.r_nodes)
    m_r = params.sigma * cell_masses(grid.r_nodes, params.N - 1.0)
    zc = 0.5 * (grid.z_nodes[:-1] + grid.z_nodes[1:])

    wz = (w[1:, :] - w[:-1, :]) / dz[:, None]          # (nz-1, nr)
    wr = (w[:, 1:] - w[:, :-1]) / dr[None, :]          # (nz, nr-1)

    wz2_cell = 0.5 * (wz[:, :-1] ** 2 + wz[:, 1:] ** 2)
    wr2_cell = 0.5 * (wr[:-1, :] ** 2 + wr[1:, :] ** 2)

    cell_w = (zc * dz)[:, None] * m_r[None, :]
    B = float(np.sum(cell_w * wz2_cell))
    A = B + float(np.sum(cell_w * wr2_cell))
    return A, B


def curvature_coefficient(gs: GroundState) -> CriterionCoefficient:
    """(N-2)/(2N) + B/(N A); lies in ((N-2)/(2N), 1/2) since 0 < B < A."""
    N = gs.params.N
    c = (N - 2.0) / (2.0 * N) + gs.B / (N * gs.A)
    return CriterionCoefficient(c_value=c, N=N, s=gs.params.s, A=gs.A, B=gs.B)


def boundary_mass(grid: AxiGrid, params: ProblemParams, w: np.ndarray) -> float:
    """sigma int r^{N-1} w(0, r)^2 dr (unweighted boundary L2 mass)."""
    weights = params.sigma * hat_weights(grid.r_nodes, params.N - 1.0)
    return float(np.sum(weights * w[0, :] ** 2))


def pohozaev_residual(gs: GroundState, w: np.ndarray | None = None) -> float:
    """|A - (1/2) int_boundary w^2| / A; small only for a true ground state."""
    field_w = gs.w if w is None else w
    A, _ = (gs.A, gs.B) if w is None else curvature_integrals(
        gs.grid, gs.params, field_w)
    half_mass = 0.5 * boundary_mass(gs.grid, gs.params, field_w)
    return abs(A - half_mass) / A


def radial_monotonicity_check(gs: GroundState, tol: float = 1e-8):
    """True iff w is non-increasing in r on every z level (up to tol)."""
    increments = gs.w[:, 1:] - gs.w[:, :-1]
    worst = float(increments.max())
    return worst <= tol, worst


def decay_fit(gs: GroundState, field_w: np.ndarray | None = None):
    """Log-log slope of the boundary trace over the window [R/4, R/2]."""
    w = gs.w if field_w is None else field_w
    r = gs.grid.r_nodes
    R = gs.grid.R_trunc
    mask = (r >= R / 4.0) & (r <= R / 2.0)
    if mask.sum() < 10:
        raise GridFitError("fit window [R/4, R/2] has fewer than 10 nodes")
    vals = w[0, mask]
    pos = vals > 0.0
    if pos.sum() < 10:
        raise GridFitError("too few positive boundary values in fit window")
    slope = np.polyfit(np.log(r[mask][pos]), np.log(vals[pos]), 1)[0]
    return float(slope)


def decay_amplitude(gs: GroundState) -> float:
    """Amplitude C of the fitted tail w(0, r) ~ C r^{-(N-1)}.

    Used to extrapolate w beyond the truncated grid.
    """
    r = gs.grid.r_nodes
    R = gs.grid.R_trunc
    mask = (r >= R / 4.0) & (r <= R / 2.0)
    vals = gs.w[0, mask]
    pos = vals > 0.0
    p = -(gs.params.N - 1.0)
    return float(np.exp(np.mean(np.log(vals[pos]) - p * np.log(r[mask][pos]))))


class GridFitError(RuntimeError):
    """Decay-fit window is too small for a meaningful fit."""


def evaluate_SN1(N: int) -> float:
    """Closed-form limiting constant 2 Gamma^2((N+1)/4) / Gamma^2((N-1)/4)."""
    if N < 2:
        raise ValueError("N must be >= 2")
    return 2.0 * math.gamma((N + 1) / 4.0) ** 2 / math.gamma((N - 1) / 4.0) ** 2


def default_grid(params: ProblemParams, R: float = 40.0, nz: int = 128,
                 nr: int = 192, grading: float = 1.06) -> AxiGrid:
    """Grid that balances decay-window node count against axis resolution."""
    return build_axi_grid(params, R=R, nz=nz, nr=nr, grading=grading)


def write_run_csv(path, gs: GroundState) -> None:
    """Iteration log plus a final summary record."""
    coef = curvature_coefficient(gs)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["iter", "quotient", "el_residual", "norm_residual"])
        for it, J, el, nr_ in gs.history:
            writer.writerow([it, f"{J:.12g}", f"{el:.6g}", f"{nr_:.6g}"])
        writer.writerow([])
        writer.writerow(["N", "s", "R", "S_value", "A", "B", "c_value",
                         "pohozaev_residual", "decay_exponent"])
        writer.writerow([gs.params.N, f"{gs.params.s:.12g}",
                         f"{gs.grid.R_trunc:.12g}", f"{gs.S_value:.12g}",
                         f"{gs.A:.12g}", f"{gs.B:.12g}",
                         f"{coef.c_value:.12g}",
                         f"{pohozaev_residual(gs):.12g}",
                         f"{decay_fit(gs):.12g}"])
