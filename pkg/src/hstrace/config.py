"""Flat key = value run configuration.

One key per line, '#' starts a comment, UTF-8. Validation collects
every violation before reporting so a bad file is fixed in one pass.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields


class ConfigError(ValueError):
    """Raised with the full list of configuration violations."""

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


MODES = ("ground-state", "domain", "criterion", "expansion",
         "coercivity", "suite")
SURFACES = ("flat", "paraboloid", "sphere")


@dataclass
class RunConfig:
    """Validated scalar configuration for one CLI run."""

    mode: str = "suite"
    # quotient parameters
    N: int = 3
    s: float = 0.5
    h0: float = 0.0
    # boundary surface of the bounded domain
    surface: str = "flat"
    kappa: float = 0.5        # paraboloid curvature parameter
    rho_s: float = 2.0        # sphere radius
    rho0: float = 0.9         # chart patch radius
    orientation: int = 1
    # bounded-domain mesh
    R_omega: float = 2.0
    n_rho: int = 96
    n_theta: int = 80
    mesh_grading: float = 1.10
    # half-space grid
    R: float = 40.0
    nz: int = 128
    nr: int = 192
    grading: float = 1.06
    # solver tolerances
    el_tol: float = 1e-4
    max_outer: int = 2000
    out: str = "out"

    @property
    def q(self) -> float:
        return 2.0 * (self.N - self.s) / (self.N - 1.0)


_INT_KEYS = {"N", "n_rho", "n_theta", "nz", "nr", "max_outer", "orientation"}
_STR_KEYS = {"mode", "surface", "out"}
_ALL_KEYS = {f.name for f in fields(RunConfig)}


def _parse_lines(text: str):
    pairs = []
    errors = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            errors.append(f"line {lineno}: expected 'key = value'")
            continue
        key, value = (part.strip() for part in line.split("=", 1))
        pairs.append((lineno, key, value))
    return pairs, errors


def parse_config(text: str) -> RunConfig:
    """Parse and fully validate; raises ConfigError listing all issues."""
    pairs, errors = _parse_lines(text)
    cfg = RunConfig()
    seen = set()
    for lineno, key, value in pairs:
        if key not in _ALL_KEYS:
            errors.append(f"line {lineno}: unknown key '{key}'")
            continue
        if key in seen:
            errors.append(f"line {lineno}: duplicate key '{key}'")
            continue
        seen.add(key)
        if key in _STR_KEYS:
            setattr(cfg, key, value)
            continue
        try:
            setattr(cfg, key, int(value) if key in _INT_KEYS
                    else float(value))
        except ValueError:
            kind = "an integer" if key in _INT_KEYS else "a number"
            errors.append(f"line {lineno}: key '{key}' needs {kind}, "
                          f"got '{value}'")

    errors.extend(validate(cfg))
    if errors:
        raise ConfigError(errors)
    return cfg


def validate(cfg: RunConfig):
    """Range checks mirroring every module precondition reachable here."""
    errors = []
    if cfg.mode not in MODES:
        errors.append(f"mode must be one of {', '.join(MODES)}")
    if cfg.N < 2:
        errors.append("N must be >= 2")
    if not 0.0 <= cfg.s < 1.0:
        errors.append("s must lie in [0,1)")
    if cfg.surface not in SURFACES:
        errors.append(f"surface must be one of {', '.join(SURFACES)}")
    if cfg.orientation not in (1, -1):
        errors.append("orientation must be +1 or -1")
    if cfg.rho0 <= 0.0:
        errors.append("rho0 must be positive")
    if cfg.rho0 >= cfg.R_omega:
        errors.append("rho0 must be below R_omega")
    if cfg.surface == "sphere" and cfg.rho0 >= cfg.rho_s:
        errors.append("rho0 must be below the sphere radius rho_s")
    if cfg.surface == "sphere" and cfg.rho_s <= 0.0:
        errors.append("rho_s must be positive")
    if cfg.n_rho < 8 or cfg.n_theta < 8:
        errors.append("n_rho and n_theta must be >= 8")
    if cfg.mesh_grading < 1.0 or cfg.grading < 1.0:
        errors.append("grading ratios must be >= 1")
    if cfg.R <= 0.0:
        errors.append("R must be positive")
    if cfg.nz < 8 or cfg.nr < 8:
        errors.append("nz and nr must be >= 8")
    if cfg.el_tol <= 0.0:
        errors.append("el_tol must be positive")
    if cfg.max_outer < 1:
        errors.append("max_outer must be >= 1")
    return errors


def load_config(path: str) -> RunConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())
