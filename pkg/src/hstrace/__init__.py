"""Numerical variational toolkit for weighted trace inequalities.

Half-space ground states, boundary-surface geometry, mixed quotients on
bounded axisymmetric domains, and first-order energy expansions, tied
together by a CLI and an acceptance suite.
"""

from .numerics import (AxiGrid, ConvergenceError, GridError,
                       IndefiniteFormError, ProblemParams, build_axi_grid)
from .halfspace import (GroundState, SolverOptions, compute_ground_state,
                        curvature_coefficient, evaluate_SN1)
from .geometry import (BoundarySurface, ChartError, flat_surface,
                       paraboloid_surface, sphere_surface)
from .domain import (CriterionReport, DomainMesh, MixedMinimizer,
                     build_domain_mesh, coercivity_margin, compute_mu)
from .expansion import ExpansionReport, sweep_J, theory_slope
from .config import ConfigError, RunConfig, parse_config
from .suite import SuiteReport, run_suite

__all__ = [
    "AxiGrid", "ConvergenceError", "GridError", "IndefiniteFormError",
    "ProblemParams", "build_axi_grid", "GroundState", "SolverOptions",
    "compute_ground_state", "curvature_coefficient", "evaluate_SN1",
    "BoundarySurface", "ChartError", "flat_surface", "paraboloid_surface",
    "sphere_surface", "CriterionReport", "DomainMesh", "MixedMinimizer",
    "build_domain_mesh", "coercivity_margin", "compute_mu",
    "ExpansionReport", "sweep_J", "theory_slope", "ConfigError",
    "RunConfig", "parse_config", "SuiteReport", "run_suite",
]
