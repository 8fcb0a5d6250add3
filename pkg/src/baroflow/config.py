"""Run configuration: flat key = value files with dotted keys.

The format is deliberately plain so configs diff well and need no parser
dependency: one ``key = value`` pair per line, ``#`` starts a comment,
sections are spelled via dotted keys (``solver.cfl``).  The full schema is
documented in the README; every invariant is checked up front and all
violations are reported together before any compute starts.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields as dc_fields, replace
from importlib import resources
from pathlib import Path
from typing import Optional

from .cases import CASE_FACTORIES, BenchmarkCase, make_case
from .flux import FluxParams, epsilon_bound
from .grid import MeshTopology, build_mesh
from .model import GasModel
from .solver import SolverConfig


class ConfigError(ValueError):
    """Raised with the full list of violated invariants."""

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


@dataclass
class RunConfig:
    case: str = ""
    dim: int = 2
    cells_per_axis: tuple[int, ...] = ()
    t_final: Optional[float] = None          # falls back to the case default
    a: float = 1.0
    gamma: float = 1.4
    mu: float = 0.01
    lam: float = 0.01
    epsilon: float = 0.6
    cfl: float = 0.3
    dt_cap: Optional[float] = None
    picard_tol: float = 1e-10
    picard_max_iter: int = 50
    linear_tol: float = 1e-12
    linear_max_iter: int = 1000
    output_dir: str = "out"
    snapshot_stride: Optional[int] = None     # default: ~10% of estimated steps


_KEY_MAP = {
    "case": ("case", str),
    "dim": ("dim", int),
    "cells_per_axis": ("cells_per_axis", "int_list"),
    "t_final": ("t_final", float),
    "model.a": ("a", float),
    "model.gamma": ("gamma", float),
    "model.mu": ("mu", float),
    "model.lambda": ("lam", float),
    "flux.epsilon": ("epsilon", float),
    "solver.cfl": ("cfl", float),
    "solver.dt_cap": ("dt_cap", float),
    "solver.picard_tol": ("picard_tol", float),
    "solver.picard_max_iter": ("picard_max_iter", int),
    "solver.linear_tol": ("linear_tol", float),
    "solver.linear_max_iter": ("linear_max_iter", int),
    "output_dir": ("output_dir", str),
    "snapshot_stride": ("snapshot_stride", int),
}


def parse_config_text(text: str, source: str = "<config>") -> dict[str, str]:
    """Key/value pairs from config text; rejects malformed lines."""
    pairs: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError([f"{source}:{lineno}: expected 'key = value', got {raw!r}"])
        key, value = (part.strip() for part in line.split("=", 1))
        pairs[key] = value
    return pairs


def profile_path(name: str) -> Path:
    """Filesystem path of a packaged reference profile (e.g. 'experiment1')."""
    res = resources.files("baroflow").joinpath(f"profiles/{name}.cfg")
    with resources.as_file(res) as p:
        return Path(p)


def resolve_config_path(spec: str) -> Path:
    """A real file path, or the packaged profile of that name."""
    p = Path(spec)
    if p.is_file():
        return p
    bare = spec.removesuffix(".cfg")
    candidate = profile_path(bare)
    if candidate.is_file():
        return candidate
    raise ConfigError([f"config file {spec!r} not found (and no packaged profile matches)"])


def build_config(pairs: dict[str, str]) -> RunConfig:
    """Typed RunConfig from raw key/value strings; unknown keys are errors."""
    violations = []
    kwargs = {}
    for key, value in pairs.items():
        if key not in _KEY_MAP:
            violations.append(f"unknown config key {key!r}")
            continue
        attr, conv = _KEY_MAP[key]
        try:
            if conv == "int_list":
                kwargs[attr] = tuple(int(v) for v in value.replace(",", " ").split())
            else:
                kwargs[attr] = conv(value)
        except ValueError:
            violations.append(f"config key {key!r}: cannot parse {value!r}")
    if violations:
        raise ConfigError(violations)
    return RunConfig(**kwargs)


def load_config(path, overrides: Optional[dict[str, str]] = None) -> RunConfig:
    path = resolve_config_path(str(path))
    pairs = parse_config_text(path.read_text(encoding="utf-8"), source=str(path))
    if overrides:
        pairs.update(overrides)
    return build_config(pairs)


def validate(cfg: RunConfig) -> list[str]:
    """All violated invariants, empty when the configuration is usable."""
    v = []
    if cfg.case not in CASE_FACTORIES:
        known = ", ".join(sorted(CASE_FACTORIES))
        v.append(f"case = {cfg.case!r} is not one of: {known}")
    if cfg.dim not in (1, 2, 3):
        v.append(f"dim = {cfg.dim} must be 1, 2 or 3")
    if not cfg.cells_per_axis:
        v.append("cells_per_axis is required")
    elif len(cfg.cells_per_axis) != cfg.dim:
        v.append(
            f"cells_per_axis = {cfg.cells_per_axis} needs exactly {cfg.dim} entries"
        )
    elif any(n < 2 for n in cfg.cells_per_axis):
        v.append(f"cells_per_axis = {cfg.cells_per_axis}: every axis needs >= 2 cells")
    if cfg.a <= 0.0:
        v.append(f"model.a = {cfg.a} must be > 0")
    if cfg.gamma <= 1.0:
        v.append(f"model.gamma = {cfg.gamma} must be > 1")
    if cfg.mu <= 0.0:
        v.append(f"model.mu = {cfg.mu} must be > 0")
    if cfg.lam < -cfg.mu:
        v.append(f"model.lambda = {cfg.lam} must satisfy lambda >= -mu = {-cfg.mu}")
    if cfg.gamma > 1.0:
        bound = epsilon_bound(cfg.gamma)
        if not 0.0 < cfg.epsilon < bound:
            v.append(
                f"flux.epsilon = {cfg.epsilon} violates "
                f"0 < epsilon < min{{1, 2(gamma-1)}} = {bound}"
            )
    if not 0.0 < cfg.cfl <= 1.0:
        v.append(f"solver.cfl = {cfg.cfl} must lie in (0, 1]")
    if cfg.dt_cap is not None and cfg.dt_cap <= 0.0:
        v.append(f"solver.dt_cap = {cfg.dt_cap} must be > 0")
    if cfg.picard_tol <= 0.0:
        v.append(f"solver.picard_tol = {cfg.picard_tol} must be > 0")
    if cfg.picard_max_iter < 1:
        v.append(f"solver.picard_max_iter = {cfg.picard_max_iter} must be >= 1")
    if cfg.linear_tol <= 0.0:
        v.append(f"solver.linear_tol = {cfg.linear_tol} must be > 0")
    if cfg.linear_max_iter < 1:
        v.append(f"solver.linear_max_iter = {cfg.linear_max_iter} must be >= 1")
    if cfg.t_final is not None and cfg.t_final < 0.0:
        v.append(f"t_final = {cfg.t_final} must be >= 0")
    if cfg.snapshot_stride is not None and cfg.snapshot_stride < 1:
        v.append(f"snapshot_stride = {cfg.snapshot_stride} must be >= 1")
    return v


def validated(cfg: RunConfig) -> RunConfig:
    violations = validate(cfg)
    if violations:
        raise ConfigError(violations)
    return cfg


# constructors ---------------------------------------------------------------


def make_mesh(cfg: RunConfig) -> MeshTopology:
    return build_mesh(cfg.dim, cfg.cells_per_axis)


def make_model(cfg: RunConfig) -> GasModel:
    return GasModel(gamma=cfg.gamma, mu=cfg.mu, lam=cfg.lam, a=cfg.a)


def make_flux_params(cfg: RunConfig, mesh: MeshTopology) -> FluxParams:
    return FluxParams(cfg.epsilon, mesh.h)


def make_solver_config(cfg: RunConfig) -> SolverConfig:
    return SolverConfig(
        cfl=cfg.cfl,
        dt_cap=cfg.dt_cap,
        picard_tol=cfg.picard_tol,
        picard_max_iter=cfg.picard_max_iter,
        linear_tol=cfg.linear_tol,
        linear_max_iter=cfg.linear_max_iter,
    )


def make_benchmark(cfg: RunConfig) -> BenchmarkCase:
    case = make_case(cfg.case, model=make_model(cfg))
    if cfg.t_final is not None:
        case = case.with_final_time(cfg.t_final)
    return case
