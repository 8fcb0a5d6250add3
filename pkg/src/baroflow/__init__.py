"""Implicit upwind finite volume solver for compressible barotropic flow
on periodic structured grids, with an energy-stability and convergence
verification harness."""

from .cases import BenchmarkCase, gresho_case, make_case, manufactured_case
from .diagnostics import (
    EnergyBudget,
    ErrorReport,
    energy_budget,
    eoc,
    error_norms,
    total_energy,
    total_mass,
)
from .fields import (
    FaceField,
    FaceTrace,
    ScalarField,
    VectorField,
    project_cell,
    project_cell_vector,
    project_dual,
    trace,
)
from .flux import FluxParams, diffusive_flux, mass_flux, momentum_flux, upwind
from .grid import DualCell, FaceId, MeshTopology, build_mesh, neighbor_across
from .model import Forcing, GasModel, pressure, pressure_potential, sound_speed
from .operators import OperatorWorkspace, div_h, grad_dual, grad_edge, laplace_h
from .solver import (
    PicardConvergenceError,
    PositivityError,
    RunResult,
    SolverConfig,
    SolverError,
    State,
    StepReport,
    compute_dt,
    picard_step,
    run,
    solve_continuity,
    solve_momentum,
)

__version__ = "0.1.0"
