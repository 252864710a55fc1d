"""Axisymmetric grids, singular-weight quadrature, energy forms and a CG solver.

Everything downstream works on a 2D quarter-plane (z, r) with the measure
sigma_{N-1} r^{N-1} dr dz and the boundary trace measure
sigma_{N-1} r^{N-1-s} dr on the row z = 0.  Radial weights are integrated
in closed form per cell because r^{N-1-s} has an unbounded derivative at
r = 0 for s > 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp


class GridError(ValueError):
    """Invalid grid request (non-monotone nodes, s out of range, ...)."""


class ConvergenceError(RuntimeError):
    """Iterative solver failed to reach its tolerance."""

    def __init__(self, message, residual=None, iterations=None):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


class IndefiniteFormError(RuntimeError):
    """CG met a direction of non-positive curvature."""


def sphere_area(n: int) -> float:
    """Surface area of the unit sphere S^{n-1} in R^n."""
    return 2.0 * math.pi ** (n / 2.0) / math.gamma(n / 2.0)


@dataclass(frozen=True)
class ProblemParams:
    """Dimension N, singularity exponent s and derived trace exponent q."""

    N: int
    s: float
    h0: float = 0.0
    q: float = field(init=False)

    def __post_init__(self):
        if self.N < 2:
            raise ValueError("N must be >= 2")
        if not (0.0 <= self.s < 1.0):
            raise ValueError("s must lie in [0,1)")
        object.__setattr__(self, "q", 2.0 * (self.N - self.s) / (self.N - 1))

    @property
    def sigma(self) -> float:
        """Area of S^{N-1}, the angular factor of the reduced measures."""
        return sphere_area(self.N)


def graded_nodes(length: float, n: int, grading: float) -> np.ndarray:
    """n nodes on [0, length], cell widths growing geometrically by `grading`."""
    if n < 2:
        raise GridError("need at least 2 nodes")
    if grading < 1.0:
        raise GridError("grading ratio must be >= 1")
    ncell = n - 1
    if grading == 1.0:
        return np.linspace(0.0, length, n)
    h0 = length * (grading - 1.0) / (grading**ncell - 1.0)
    widths = h0 * grading ** np.arange(ncell)
    nodes = np.concatenate(([0.0], np.cumsum(widths)))
    nodes[-1] = length
    return nodes


def power_antiderivative(r: np.ndarray, p: float) -> np.ndarray:
    """Antiderivative of r^p, vanishing at 0 (p > -1)."""
    return np.power(r, p + 1.0) / (p + 1.0)


def cell_masses(r_nodes: np.ndarray, p: float) -> np.ndarray:
    """Exact integrals of r^p over each cell [r_j, r_{j+1}]."""
    F = power_antiderivative(r_nodes, p)
    return np.diff(F)


def hat_weights(r_nodes: np.ndarray, p: float) -> np.ndarray:
    """Nodal weights w_i = int phi_i(r) r^p dr with phi_i the P1 hat functions.

    The moments are closed-form, so the rule integrates piecewise-linear
    interpolants against the singular weight exactly (second order overall,
    with the full sum exactly equal to int_0^R r^p dr).
    """
    n = len(r_nodes)
    F0 = power_antiderivative(r_nodes, p)
    F1 = power_antiderivative(r_nodes, p + 1.0)
    w = np.zeros(n)
    dm0 = np.diff(F0)  # int cell r^p
    dm1 = np.diff(F1)  # int cell r^{p+1}
    h = np.diff(r_nodes)
    # left hat on cell j: (r_{j+1} - r)/h ; right hat: (r - r_j)/h
    left = (r_nodes[1:] * dm0 - dm1) / h
    right = (dm1 - r_nodes[:-1] * dm0) / h
    w[:-1] += left
    w[1:] += right
    return w


def cumulative_weights(r_nodes: np.ndarray, p: float) -> np.ndarray:
    """Nodal weights whose cumulative sums are the exact integrals int_0^{r_k} r^p dr."""
    F = power_antiderivative(r_nodes, p)
    w = np.zeros(len(r_nodes))
    w[1:] = np.diff(F)
    return w


@dataclass
class AxiGrid:
    """Tensor grid on [0, z_max] x [0, R_trunc] for the reduced quarter-plane.

    trace_weights carry the full singular boundary measure
    sigma r^{N-1-s} dr (hat-moment rule); vol_weights carry sigma r^{N-1} dr dz
    with zero weight on the axis node.
    """

    params: ProblemParams
    z_nodes: np.ndarray
    r_nodes: np.ndarray
    R_trunc: float
    vol_weights: np.ndarray       # (nz, nr)
    trace_weights: np.ndarray     # (nr,)

    @property
    def nz(self) -> int:
        return len(self.z_nodes)

    @property
    def nr(self) -> int:
        return len(self.r_nodes)

    @property
    def shape(self):
        return (self.nz, self.nr)

    def index(self, i: int, j: int) -> int:
        return i * self.nr + j

    def trace_cumulative_exact(self, rho: float) -> float:
        """Closed-form sigma * int_0^rho r^{N-1-s} dr."""
        p = self.params
        return p.sigma * rho ** (p.N - p.s) / (p.N - p.s)

    def boundary_mass_weights(self, power_offset: float = 0.0) -> np.ndarray:
        """Hat weights for sigma r^{N-1+power_offset} dr on the z=0 row."""
        p = self.params
        return p.sigma * hat_weights(self.r_nodes, p.N - 1.0 + power_offset)


def build_axi_grid(params: ProblemParams, R: float, nz: int, nr: int,
                   grading: float = 1.1, z_max: float | None = None) -> AxiGrid:
    """Grid for the truncated quarter-plane with singular-weight quadrature.

    Radial nodes are geometrically graded toward r = 0; z nodes toward z = 0.
    Trace weights integrate r^{N-1-s} in closed form on each cell.
    """
    if R <= 0:
        raise GridError("R must be positive")
    if nz < 8 or nr < 8:
        raise GridError("nz and nr must be >= 8")
    if grading < 1.0:
        raise GridError("grading must be >= 1")
    if params.s >= 1.0:
        raise GridError("s >= 1 not supported by the discretization")
    z_max = R if z_max is None else z_max
    z_nodes = graded_nodes(z_max, nz, grading)
    r_nodes = graded_nodes(R, nr, grading)

    sigma = params.sigma
    trace_weights = sigma * hat_weights(r_nodes, params.N - 1.0 - params.s)

    # volume: trapezoid in z, cumulative-exact masses in r (axis weight 0)
    wz = np.zeros(nz)
    dz = np.diff(z_nodes)
    wz[:-1] += 0.5 * dz
    wz[1:] += 0.5 * dz
    wr = sigma * cumulative_weights(r_nodes, params.N - 1.0)
    vol_weights = np.outer(wz, wr)

    return AxiGrid(params=params, z_nodes=z_nodes, r_nodes=r_nodes,
                   R_trunc=R, vol_weights=vol_weights,
                   trace_weights=trace_weights)


@dataclass
class SparseForm:
    """Symmetric sparse quadratic form over grid nodes."""

    matrix: sp.csr_matrix
    descriptor: str

    def energy(self, v: np.ndarray) -> float:
        x = v.reshape(-1)
        return float(x @ (self.matrix @ x))

    def apply(self, v: np.ndarray) -> np.ndarray:
        return self.matrix @ v.reshape(-1)


def assemble_dirichlet_energy(grid: AxiGrid, params: ProblemParams) -> SparseForm:
    """Sparse form Q with v^T Q v ~ sigma * int r^{N-1} (v_z^2 + v_r^2) dr dz.

    Cell rule: each cell contributes its exact radial mass times the average
    of the squared one-sided differences along its two z-edges and two
    r-edges; second-order consistent on smooth fields.
    """
    nz, nr = grid.shape
    dz = np.diff(grid.z_nodes)
    dr = np.diff(grid.r_nodes)
    m_r = params.sigma * cell_masses(grid.r_nodes, params.N - 1.0)

    rows, cols, vals = [], [], []

    def add_edge(a, b, c):
        rows.extend((a, b, a, b))
        cols.extend((a, a, b, b))
        vals.extend((c, -c, -c, c))

    idx = np.arange(nz * nr).reshape(nz, nr)

    # z-edges: column j between rows i, i+1. Nodal radial weights use the
    # P1 hat moments so the column stiffness matches the trace rule near the
    # axis; a half-half cell-mass split is O(1) inconsistent there.
    hat_mr = params.sigma * hat_weights(grid.r_nodes, params.N - 1.0)
    for i in range(nz - 1):
        c_col = hat_mr / dz[i]
        for j in range(nr):
            add_edge(idx[i, j], idx[i + 1, j], c_col[j])

    # r-edges: row i between columns j, j+1
    half_dz = np.zeros(nz)
    half_dz[:-1] += 0.5 * dz
    half_dz[1:] += 0.5 * dz
    for i in range(nz):
        c_row = half_dz[i] * m_r / dr**2
        for j in range(nr - 1):
            add_edge(idx[i, j], idx[i, j + 1], c_row[j])

    n = nz * nr
    Q = sp.coo_matrix((vals, (rows, cols)), shape=(n, n)).tocsr()
    return SparseForm(matrix=Q, descriptor="dirichlet-energy r^{N-1} dr dz")


def trace_functional(grid: AxiGrid, params: ProblemParams,
                     v: np.ndarray, t: float) -> float:
    """sigma * int r^{N-1-s} |v(0, r)|^t dr using the grid trace weights."""
    if t < 1:
        raise ValueError("exponent t must be >= 1")
    boundary = np.asarray(v).reshape(grid.shape)[0, :]
    return float(np.sum(grid.trace_weights * np.abs(boundary) ** t))


def solve_spd(form: SparseForm, rhs: np.ndarray, tol: float = 1e-10,
              x0: np.ndarray | None = None, max_iter: int | None = None,
              restarts: int = 3) -> np.ndarray:
    """Jacobi-preconditioned CG for a symmetric positive definite form.

    Deterministic; raises IndefiniteFormError on a direction of
    non-positive curvature and ConvergenceError if the relative residual
    stays above tol after all restarts.
    """
    A = form.matrix
    b = np.asarray(rhs, dtype=float).reshape(-1)
    n = len(b)
    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        return np.zeros(n)
    if max_iter is None:
        max_iter = 4 * n

    diag = A.diagonal().copy()
    diag[diag <= 0.0] = 1.0
    inv_diag = 1.0 / diag

    x = np.zeros(n) if x0 is None else np.array(x0, dtype=float).reshape(-1)
    res = None
    for _ in range(restarts):
        r = b - A @ x
        z = inv_diag * r
        p = z.copy()
        rz = r @ z
        for _ in range(max_iter):
            Ap = A @ p
            pAp = p @ Ap
            if pAp <= 0.0:
                if np.linalg.norm(p) > 0.0:
                    raise IndefiniteFormError(
                        "non-positive curvature direction encountered")
                break
            alpha = rz / pAp
            x += alpha * p
            r -= alpha * Ap
            res = np.linalg.norm(r) / bnorm
            if res <= tol:
                return x
            z = inv_diag * r
            rz_new = r @ z
            p = z + (rz_new / rz) * p
            rz = rz_new
        res = np.linalg.norm(b - A @ x) / bnorm
        if res <= tol:
            return x
    raise ConvergenceError(
        f"CG did not converge: relative residual {res:.3e} > {tol:.1e}",
        residual=res, iterations=max_iter * restarts)
