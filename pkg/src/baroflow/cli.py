"""Command-line front end: configuration, run orchestration, reports.

Two subcommands.  ``run`` executes one configured simulation and writes the
per-step diagnostics CSV, periodic field snapshots, a one-line summary CSV
and rendered figures.  ``eoc`` executes a mesh-refinement study and writes
the error/EOC table plus a convergence figure.  Identical configs reproduce
byte-identical CSV science outputs (the summary's wall-clock column is the
one deliberate exception).
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from . import config as cfgmod
from . import solver
from .cases import BenchmarkCase
from .config import ConfigError, RunConfig
from .diagnostics import (
    EocRow,
    ErrorAccumulator,
    ExactReference,
    FineReferenceConsumer,
    RunMonitor,
    build_eoc_table,
    total_mass,
    write_eoc_csv,
)
from .fields import write_snapshot
from .grid import build_mesh
from .plots import plot_eoc, plot_history, plot_state

DIAG_COLUMNS = [
    "step", "t", "dt", "picard_iters", "mass", "energy", "energy_slack",
    "min_rho", "max_u",
]

SUMMARY_COLUMNS = [
    "steps", "t_final", "mass_initial", "mass_final", "mass_drift",
    "min_rho", "wall_time_s",
]


def write_diagnostics_csv(path, reports) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(DIAG_COLUMNS)
        for step, rep in enumerate(reports, start=1):
            writer.writerow([
                step, repr(rep.t), repr(rep.dt), rep.picard_iters,
                repr(rep.mass), repr(rep.energy), repr(rep.energy_slack),
                repr(rep.min_rho), repr(rep.max_u),
            ])


def read_diagnostics_csv(path) -> list[dict]:
    rows = []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != DIAG_COLUMNS:
            raise ValueError(f"unexpected diagnostics header {header}")
        for record in reader:
            row = dict(zip(DIAG_COLUMNS, record))
            for key in ("step", "picard_iters"):
                row[key] = int(row[key])
            for key in ("t", "dt", "mass", "energy", "energy_slack", "min_rho", "max_u"):
                row[key] = float(row[key])
            rows.append(row)
    return rows


def write_summary_csv(path, values: dict) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(SUMMARY_COLUMNS)
        writer.writerow([repr(values[k]) if isinstance(values[k], float) else values[k]
                         for k in SUMMARY_COLUMNS])


def read_summary_csv(path) -> dict:
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != SUMMARY_COLUMNS:
            raise ValueError(f"unexpected summary header {header}")
        record = next(reader)
    out = dict(zip(SUMMARY_COLUMNS, record))
    out["steps"] = int(out["steps"])
    for key in SUMMARY_COLUMNS[1:]:
        out[key] = float(out[key])
    return out


def _fail(kind: str, detail) -> None:
    print(json.dumps({"error": kind, "detail": detail}), file=sys.stderr)


def _estimate_stride(case: BenchmarkCase, mesh, model, solver_cfg) -> int:
    """Default snapshot stride: roughly one dump per 10% of the run."""
    state0 = solver.initial_state(case, mesh)
    if case.t_final <= 0.0:
        return 1
    dt0 = solver.compute_dt(state0, model, mesh, solver_cfg)
    est_steps = max(1, math.ceil(case.t_final / dt0))
    return max(1, round(0.1 * est_steps))


def cmd_run(cfg: RunConfig) -> int:
    violations = cfgmod.validate(cfg)
    if violations:
        _fail("config", violations)
        return 2

    mesh = cfgmod.make_mesh(cfg)
    model = cfgmod.make_model(cfg)
    params = cfgmod.make_flux_params(cfg, mesh)
    solver_cfg = cfgmod.make_solver_config(cfg)
    case = cfgmod.make_benchmark(cfg)

    outdir = Path(cfg.output_dir)
    outdir.mkdir(parents=True, exist_ok=True)
    stride = cfg.snapshot_stride or _estimate_stride(case, mesh, model, solver_cfg)

    reports = []
    t_start = time.perf_counter()

    state0 = solver.initial_state(case, mesh)
    write_snapshot(outdir / "snapshot_0.csv", state0.rho, state0.u)
    min_rho = float(state0.rho.data.min())

    def on_step(step, state, report):
        reports.append(report)
        if step % stride == 0:
            write_snapshot(outdir / f"snapshot_{step}.csv", state.rho, state.u)

    try:
        result = solver.run(
            case, mesh, model, solver_cfg, params, on_step=on_step, keep_states=False
        )
    except solver.SolverError as exc:
        _fail("step_failure", str(exc))
        return 1

    wall = time.perf_counter() - t_start
    final = result.final_state
    steps = len(reports)
    if steps % stride != 0:  # forced snapshot at the final time
        write_snapshot(outdir / f"snapshot_{steps}.csv", final.rho, final.u)

    write_diagnostics_csv(outdir / "diagnostics.csv", reports)
    mass0 = total_mass(state0)
    mass1 = reports[-1].mass if reports else mass0
    if reports:
        min_rho = min(min_rho, min(r.min_rho for r in reports))
    write_summary_csv(outdir / "summary.csv", {
        "steps": steps,
        "t_final": final.time,
        "mass_initial": mass0,
        "mass_final": mass1,
        "mass_drift": abs(mass1 - mass0),
        "min_rho": min_rho,
        "wall_time_s": wall,
    })
    if reports:
        plot_history(reports, outdir / "history.png")
    plot_state(final, outdir / "final_state.png")
    print(f"{case.name}: {steps} steps to t = {final.time:.6g}, "
          f"mass drift {abs(mass1 - mass0):.3e}, wall {wall:.2f} s")
    return 0


# refinement study ------------------------------------------------------------


@dataclass
class LevelRun:
    """Bookkeeping for one refinement level of a study."""

    level: int
    mesh: object
    reports: list
    monitor: RunMonitor
    errors: object = None  # ErrorReport once the reference has been consumed


def _validate_levels(levels, reference: str) -> list[str]:
    v = []
    if any(n < 2 for n in levels):
        v.append(f"levels {levels} must all be >= 2")
    if sorted(levels) != list(levels) or len(set(levels)) != len(levels):
        v.append(f"levels {levels} must be strictly increasing")
    if any(n & (n - 1) for n in levels):
        v.append(f"levels {levels} must be powers of two (nesting)")
    if reference == "finest" and len(levels) < 2:
        v.append("reference = finest needs at least two levels")
    return v


def run_eoc_study(
    cfg: RunConfig, levels, reference: str = "auto"
) -> tuple[list[EocRow], list[LevelRun], Optional[LevelRun]]:
    """Run a case across refinement levels and build the error/EOC table.

    ``reference`` is ``exact`` (closed-form solution), ``finest`` (the last
    level becomes the reference and gets no table row) or ``auto``.
    Returns the table rows, the per-level bookkeeping, and the reference
    level's bookkeeping in finest mode.
    """
    model = cfgmod.make_model(cfg)
    solver_cfg = cfgmod.make_solver_config(cfg)
    case = cfgmod.make_benchmark(cfg)
    if reference == "auto":
        reference = "exact" if case.has_exact_solution else "finest"
    if reference == "exact" and not case.has_exact_solution:
        raise ConfigError([f"case {case.name!r} has no exact solution"])
    if reference == "finest" and len(levels) < 2:
        raise ConfigError(["reference = finest needs at least two levels"])

    gamma = model.gamma
    level_runs: list[LevelRun] = []
    ref_run: Optional[LevelRun] = None

    if reference == "exact":
        for n in levels:
            mesh = build_mesh(cfg.dim, [n] * cfg.dim)
            params = cfgmod.make_flux_params(cfg, mesh)
            acc = ErrorAccumulator(mesh, gamma)
            exact = ExactReference(case, mesh)
            monitor = RunMonitor(mesh, gamma, params)
            lr = LevelRun(n, mesh, [], monitor)

            def on_step(step, state, report, acc=acc, exact=exact, lr=lr):
                exact.add_to(acc, state, report.dt)
                lr.monitor.update(state, report.dt)
                lr.reports.append(report)

            solver.run(case, mesh, model, solver_cfg, params,
                       on_step=on_step, keep_states=False)
            lr.errors = acc.report()
            level_runs.append(lr)
    else:
        coarse_levels, ref_level = levels[:-1], levels[-1]
        stored = []
        for n in coarse_levels:
            mesh = build_mesh(cfg.dim, [n] * cfg.dim)
            params = cfgmod.make_flux_params(cfg, mesh)
            monitor = RunMonitor(mesh, gamma, params)
            lr = LevelRun(n, mesh, [], monitor)

            def on_step(step, state, report, lr=lr):
                lr.monitor.update(state, report.dt)
                lr.reports.append(report)

            result = solver.run(case, mesh, model, solver_cfg, params,
                                on_step=on_step, keep_states=True)
            acc = ErrorAccumulator(mesh, gamma)
            dts = [rep.dt for rep in result.reports]
            stored.append((acc, result.states[1:], dts))
            level_runs.append(lr)

        ref_mesh = build_mesh(cfg.dim, [ref_level] * cfg.dim)
        ref_params = cfgmod.make_flux_params(cfg, ref_mesh)
        consumer = FineReferenceConsumer(solver.initial_state(case, ref_mesh), stored)
        ref_run = LevelRun(ref_level, ref_mesh, [], RunMonitor(ref_mesh, gamma, ref_params))

        def on_ref_step(step, state, report):
            consumer.on_ref_step(step, state, report)
            ref_run.monitor.update(state, report.dt)
            ref_run.reports.append(report)

        solver.run(case, ref_mesh, model, solver_cfg, ref_params,
                   on_step=on_ref_step, keep_states=False)
        consumer.finalize()
        for lr, (acc, _, _) in zip(level_runs, stored):
            lr.errors = acc.report()

    rows = build_eoc_table([lr.errors for lr in level_runs])
    return rows, level_runs, ref_run


def _format_table(rows: list[EocRow]) -> str:
    head = f"{'h':>10} {'e_grad_u':>12} {'eoc':>6} {'e_u':>12} {'eoc':>6} " \
           f"{'e_rho_l1':>12} {'eoc':>6} {'e_rho_LinfLg':>12} {'eoc':>6}"
    lines = [head]
    for row in rows:
        cells = [f"{row.h:>10.5f}"]
        for key in ("grad_u", "u", "rho_l1", "rho_linf_lgamma"):
            cells.append(f"{row.errors.value(key):>12.3e}")
            cells.append(f"{row.rates[key]:>6.2f}" if row.rates else f"{'--':>6}")
        lines.append(" ".join(cells))
    return "\n".join(lines)


def cmd_eoc(cfg: RunConfig, levels, reference: str) -> int:
    violations = [v for v in cfgmod.validate(cfg) if "cells_per_axis" not in v]
    violations += _validate_levels(levels, reference)
    if violations:
        _fail("config", violations)
        return 2

    outdir = Path(cfg.output_dir)
    outdir.mkdir(parents=True, exist_ok=True)
    try:
        rows, _, _ = run_eoc_study(cfg, levels, reference)
    except ConfigError as exc:
        _fail("config", exc.violations)
        return 2
    except solver.SolverError as exc:
        _fail("step_failure", str(exc))
        return 1
    write_eoc_csv(outdir / "eoc.csv", rows)
    plot_eoc(rows, outdir / "eoc_convergence.png")
    print(_format_table(rows))
    return 0


# argument parsing -------------------------------------------------------------


def _parse_overrides(pairs) -> dict[str, str]:
    out = {}
    for item in pairs or []:
        if "=" not in item:
            raise ConfigError([f"--set expects key=value, got {item!r}"])
        key, value = item.split("=", 1)
        out[key.strip()] = value.strip()
    return out


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="baroflow",
        description="Implicit upwind finite volume solver on the periodic torus",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute one configured simulation")
    p_run.add_argument("--config", required=True, help="config file or packaged profile name")
    p_run.add_argument("--set", action="append", metavar="KEY=VALUE",
                       help="override a config entry", dest="overrides")
    p_run.add_argument("--output-dir", help="override the configured output directory")

    p_eoc = sub.add_parser("eoc", help="mesh refinement study with an EOC table")
    p_eoc.add_argument("--case", required=True, help="benchmark case name")
    p_eoc.add_argument("--levels", required=True,
                       help="comma-separated cells per axis, e.g. 32,64,128")
    p_eoc.add_argument("--reference", choices=("exact", "finest"), default="auto")
    p_eoc.add_argument("--config", required=True, help="base config file or profile name")
    p_eoc.add_argument("--set", action="append", metavar="KEY=VALUE", dest="overrides")
    p_eoc.add_argument("--output-dir", help="override the configured output directory")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        overrides = _parse_overrides(args.overrides)
        if args.command == "eoc":
            overrides["case"] = args.case
        cfg = cfgmod.load_config(args.config, overrides)
        if args.output_dir:
            cfg.output_dir = args.output_dir
    except ConfigError as exc:
        _fail("config", exc.violations)
        return 2

    if args.command == "run":
        return cmd_run(cfg)
    levels = [int(tok) for tok in args.levels.replace(",", " ").split()]
    return cmd_eoc(cfg, levels, args.reference)


if __name__ == "__main__":
    sys.exit(main())
