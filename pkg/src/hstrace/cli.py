"""Command line front end.

Exit codes: 0 all checks passed, 1 a check failed, 2 configuration
error, 3 solver non-convergence.
"""

from __future__ import annotations

import argparse
import os
import sys

from . import domain as dm
from . import expansion as ex
from . import halfspace as hs
from .config import ConfigError, RunConfig, load_config, validate
from .geometry import ChartError
from .numerics import (ConvergenceError, GridError, IndefiniteFormError,
                       ProblemParams, build_axi_grid)
from .suite import (_write_csv, format_report, run_suite,
                    surface_from_config, write_expansion_csvs)

EXIT_PASS = 0
EXIT_CHECK_FAILED = 1
EXIT_CONFIG = 2
EXIT_NO_CONVERGENCE = 3


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hstrace",
        description="Variational checks for weighted trace inequalities "
                    "on half-spaces and curved-bottom domains.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, desc in [
            ("ground-state", "solve the half-space minimization"),
            ("domain", "minimize the mixed quotient on a bounded domain"),
            ("criterion", "evaluate the curvature existence criterion"),
            ("expansion", "sweep the test-function energy expansion"),
            ("coercivity", "eigenvalue margin of the quadratic form"),
            ("suite", "run the full acceptance matrix")]:
        p = sub.add_parser(name, help=desc)
        p.add_argument("--config", help="path to key = value config file")
        p.add_argument("--out", help="output directory (default: config out)")
        p.add_argument("--jobs", type=int, default=1,
                       help="concurrent independent cases")
    return parser


def _load(args) -> tuple[RunConfig, str]:
    if args.config:
        cfg = load_config(args.config)
    else:
        cfg = RunConfig()
        errors = validate(cfg)
        if errors:
            raise ConfigError(errors)
    cfg.mode = args.command
    out = args.out or cfg.out
    os.makedirs(out, exist_ok=True)
    return cfg, out


def _ground_state(cfg: RunConfig) -> hs.GroundState:
    p = ProblemParams(N=cfg.N, s=cfg.s)
    grid = build_axi_grid(p, R=cfg.R, nz=cfg.nz, nr=cfg.nr,
                          grading=cfg.grading)
    opts = hs.SolverOptions(max_outer=cfg.max_outer, el_tol=cfg.el_tol)
    return hs.compute_ground_state(p, grid, opts)


def _domain_setup(cfg: RunConfig):
    p = ProblemParams(N=cfg.N, s=cfg.s)
    surf = surface_from_config(cfg)
    mesh = dm.build_domain_mesh(surf, p, cfg.R_omega, cfg.n_rho,
                                cfg.n_theta, h=cfg.h0,
                                grading=cfg.mesh_grading)
    return surf, mesh


def cmd_ground_state(cfg: RunConfig, out: str, jobs: int) -> int:
    gs = _ground_state(cfg)
    coef = hs.curvature_coefficient(gs)
    hs.write_run_csv(os.path.join(out, "ground_state.csv"), gs)
    print(f"S = {gs.S_value:.8f}  A = {gs.A:.6f}  B = {gs.B:.6f}  "
          f"c = {coef.c_value:.6f}  iters = {gs.iterations}")
    return EXIT_PASS


def cmd_domain(cfg: RunConfig, out: str, jobs: int) -> int:
    surf, mesh = _domain_setup(cfg)
    opts = hs.SolverOptions(max_outer=max(6000, cfg.max_outer),
                            stall_rel=1e-12, stall_window=200,
                            el_tol=cfg.el_tol)
    mm = dm.compute_mu(mesh, opts)
    hm = dm.half_mass_radius(mm)
    _write_csv(os.path.join(out, "domain.csv"),
               ["surface", "H0", "h0", "mu_value", "el_interior", "el_flux",
                "el_gamma1", "half_mass_radius", "iterations"],
               [(surf.kind, surf.H0, cfg.h0, mm.mu_value, mm.el_interior,
                 mm.el_flux, mm.el_gamma1, hm, mm.iterations)])
    print(f"mu = {mm.mu_value:.8f}  half-mass radius = {hm:.5f}  "
          f"EL flux residual = {mm.el_flux:.2e}")
    return EXIT_PASS


def cmd_criterion(cfg: RunConfig, out: str, jobs: int) -> int:
    gs = _ground_state(cfg)
    surf, mesh = _domain_setup(cfg)
    opts = hs.SolverOptions(max_outer=max(6000, cfg.max_outer),
                            stall_rel=1e-12, stall_window=200,
                            el_tol=cfg.el_tol)
    mm = dm.compute_mu(mesh, opts)
    c = hs.curvature_coefficient(gs).c_value
    rep = dm.CriterionReport(N=cfg.N, s=cfg.s, c_value=c, H0=surf.H0,
                             h0=cfg.h0, mu_value=mm.mu_value,
                             S_value=gs.S_value)
    _write_csv(os.path.join(out, "criterion.csv"),
               ["case", "H0", "h0", "c_value", "lhs", "mu_value", "S_value",
                "gap", "el_interior", "el_flux", "el_gamma1",
                "half_mass_radius"],
               [(f"s{cfg.s:g}_H{surf.H0:g}_h{cfg.h0:g}", surf.H0, cfg.h0, c,
                 rep.lhs, mm.mu_value, gs.S_value, rep.gap, mm.el_interior,
                 mm.el_flux, mm.el_gamma1, dm.half_mass_radius(mm))])
    print(f"lhs = c*H0 + h0 = {rep.lhs:+.6f}  satisfied = {rep.satisfied}  "
          f"mu = {mm.mu_value:.6f}  S = {gs.S_value:.6f}  gap = {rep.gap:+.6f}")
    if rep.satisfied and rep.gap <= 0.0:
        print("check failed: criterion satisfied but no strict gap",
              file=sys.stderr)
        return EXIT_CHECK_FAILED
    return EXIT_PASS


def cmd_expansion(cfg: RunConfig, out: str, jobs: int) -> int:
    gs = _ground_state(cfg)
    surf, mesh = _domain_setup(cfg)
    p = gs.params
    from .geometry import flat_surface
    flat = flat_surface(cfg.N, rho0=cfg.rho0)
    mesh_flat = dm.build_domain_mesh(flat, p, cfg.R_omega, cfg.n_rho,
                                     cfg.n_theta, h=0.0,
                                     grading=cfg.mesh_grading)
    ref = ex.sweep_J(gs, mesh_flat, flat, 0.0, 0.0)
    rep = ex.sweep_J(gs, mesh, surf, surf.H0, cfg.h0, reference=ref)
    write_expansion_csvs(out, gs, [(surf.H0, cfg.h0)], [rep], cfg.rho0)
    print(f"intercept = {rep.fit_intercept:.6f} (S = {gs.S_value:.6f})  "
          f"slope = {rep.fit_slope:+.5f}  predicted = "
          f"{rep.theory_slope:+.5f}  rel = {rep.slope_rel_error:.3f}")
    intercept_ok = abs(rep.fit_intercept - gs.S_value) <= 0.02 * gs.S_value
    if rep.theory_slope == 0.0:
        slope_ok = abs(rep.fit_slope) <= 0.05 * gs.S_value
    else:
        slope_ok = rep.slope_rel_error <= 0.15 and rep.sign_match
    if intercept_ok and slope_ok:
        return EXIT_PASS
    print("check failed: expansion fit outside tolerances", file=sys.stderr)
    return EXIT_CHECK_FAILED


def cmd_coercivity(cfg: RunConfig, out: str, jobs: int) -> int:
    _, mesh = _domain_setup(cfg)
    margin = dm.coercivity_margin(mesh)
    _write_csv(os.path.join(out, "coercivity.csv"),
               ["surface", "h0", "margin"],
               [(cfg.surface, cfg.h0, margin)])
    print(f"coercivity margin = {margin:.6f}")
    return EXIT_PASS if margin > 0.0 else EXIT_CHECK_FAILED


def cmd_suite(cfg: RunConfig, out: str, jobs: int) -> int:
    report = run_suite(cfg, out_dir=out, jobs=jobs)
    print(format_report(report))
    return EXIT_PASS if report.overall else EXIT_CHECK_FAILED


_COMMANDS = {
    "ground-state": cmd_ground_state,
    "domain": cmd_domain,
    "criterion": cmd_criterion,
    "expansion": cmd_expansion,
    "coercivity": cmd_coercivity,
    "suite": cmd_suite,
}


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        cfg, out = _load(args)
    except ConfigError as exc:
        for v in exc.violations:
            print(f"config error: {v}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return _COMMANDS[args.command](cfg, out, args.jobs)
    except ConvergenceError as exc:
        print(f"solver did not converge: {exc}", file=sys.stderr)
        return EXIT_NO_CONVERGENCE
    except IndefiniteFormError as exc:
        print(f"check failed: {exc}", file=sys.stderr)
        return EXIT_CHECK_FAILED
    except (GridError, ChartError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
