"""Implicit finite volume step and time loop.

One step advances (rho, u) by backward Euler.  The nonlinear implicit system
is solved by a fixed-point (Picard) iteration that freezes the advecting
velocity: each sub-iteration first solves the continuity row for the density
(upwind transport implicit in rho, so the matrix is diagonally dominant with
nonpositive off-diagonal entries and the update stays positive and exactly
conservative), then the momentum rows for the velocity (transported momentum
implicit, pressure lagged to the current density iterate, viscous terms
implicit, all velocity components coupled through the divergence penalty).

Linear systems are assembled as CSR matrices and solved by BiCGSTAB with a
Jacobi preconditioner and warm starts; a direct sparse solve is the fallback
whenever the Krylov iteration fails to meet the relative-residual tolerance,
and the achieved residual is always verified.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import bicgstab, spsolve

from . import diagnostics
from .fields import (
    ScalarField,
    VectorField,
    face_average,
    project_cell,
    project_cell_vector,
)
from .flux import FluxParams, mass_flux, momentum_flux, negative_part, positive_part
from .grid import MeshTopology
from .model import Forcing, GasModel, pressure, sound_speed
from .operators import OperatorWorkspace, div_h, laplace_h


class SolverError(Exception):
    """Base class for step failures."""


class LinearSolverError(SolverError):
    """A linear sub-solve missed its residual tolerance."""


class PicardConvergenceError(SolverError):
    """The fixed-point iteration did not converge within the iteration cap."""


class PositivityError(SolverError):
    """A density update produced a nonpositive cell value."""


@dataclass
class State:
    """Density/velocity pair at one time level; density strictly positive."""

    time: float
    rho: ScalarField
    u: VectorField

    def __post_init__(self):
        if not np.all(np.isfinite(self.rho.data)) or not np.all(np.isfinite(self.u.data)):
            raise ValueError("state contains non-finite values")
        if self.rho.data.min() <= 0.0:
            raise ValueError(
                f"density must be strictly positive, min = {self.rho.data.min()}"
            )

    @property
    def mesh(self) -> MeshTopology:
        return self.rho.mesh

    def momentum(self) -> np.ndarray:
        return self.rho.data[None, ...] * self.u.data

    def speed(self) -> np.ndarray:
        return np.sqrt((self.u.data**2).sum(axis=0))


@dataclass(frozen=True)
class SolverConfig:
    cfl: float = 0.3
    dt_cap: Optional[float] = None
    picard_tol: float = 1e-10
    picard_max_iter: int = 50
    linear_tol: float = 1e-12
    linear_max_iter: int = 1000

    def __post_init__(self):
        if not 0.0 < self.cfl <= 1.0:
            raise ValueError(f"cfl must lie in (0, 1], got {self.cfl}")
        for name in ("picard_tol", "linear_tol"):
            if getattr(self, name) <= 0.0:
                raise ValueError(f"{name} must be positive")
        if self.dt_cap is not None and self.dt_cap <= 0.0:
            raise ValueError("dt_cap must be positive when set")


@dataclass
class StepReport:
    """Per-step diagnostics emitted by the time loop."""

    t: float
    dt: float
    picard_iters: int
    picard_residual: float
    nonlinear_residual: float
    linear_iters: int
    mass: float
    energy: float
    energy_slack: float
    min_rho: float
    max_u: float


# linear algebra helpers ----------------------------------------------------


class _Workspace:
    """Sparse building blocks reused across steps of one run."""

    def __init__(self, mesh: MeshTopology):
        self.ops = OperatorWorkspace(mesh)
        self.mesh = mesh
        self._viscous = {}

    def viscous_block(self, model: GasModel) -> sparse.csr_matrix:
        """Implicit viscous operator on the stacked velocity unknowns."""
        key = (model.mu, model.lam)
        if key not in self._viscous:
            d = self.mesh.dim
            lap = self.ops.laplacian_matrix()
            blocks = [[None] * d for _ in range(d)]
            for i in range(d):
                ci = self.ops.central_diff_matrix(i)
                for j in range(d):
                    cj = self.ops.central_diff_matrix(j)
                    blk = -(model.mu + model.lam) * (ci @ cj)
                    if i == j:
                        blk = blk - model.mu * lap
                    blocks[i][j] = blk
            self._viscous[key] = sparse.bmat(blocks, format="csr")
        return self._viscous[key]


def _convection_matrix(
    ws: _Workspace, u_frozen: VectorField, params: FluxParams
) -> sparse.csr_matrix:
    """Matrix of the flux divergence r -> (1/|K|) sum |sigma| F(r, vbar).

    The advecting normal velocity is the face average of ``u_frozen``; the
    transported quantity r is the matrix argument.  Column sums vanish, which
    is what makes the implicit transport exactly conservative.
    """
    mesh = ws.mesh
    n = mesh.cell_count
    rows, cols, vals = [], [], []
    owner = ws.ops.owner
    for axis in range(mesh.dim):
        w = 1.0 / mesh.h_axis[axis]  # |sigma| / |K|
        vbar = face_average(u_frozen.data[axis], axis).ravel()
        alpha = positive_part(vbar) + params.h_eps   # weight of the owner trace
        beta = negative_part(vbar) - params.h_eps    # weight of the neighbor trace
        nb = ws.ops.neighbor[axis]
        rows.extend((owner, owner, nb, nb))
        cols.extend((owner, nb, owner, nb))
        vals.extend((w * alpha, w * beta, -w * alpha, -w * beta))
    mat = sparse.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(n, n),
    )
    return mat.tocsr()


def _solve_linear(A, b, x0, config: SolverConfig) -> tuple[np.ndarray, int]:
    """Solve A x = b to the configured relative residual; returns (x, iters)."""
    b_norm = np.linalg.norm(b)
    if b_norm == 0.0:
        return np.zeros_like(b), 0
    iters = 0

    def count(_):
        nonlocal iters
        iters += 1

    diag = A.diagonal()
    precond = sparse.diags(1.0 / diag) if np.all(diag != 0.0) else None
    x, info = bicgstab(
        A,
        b,
        x0=x0,
        rtol=config.linear_tol,
        atol=0.0,
        maxiter=config.linear_max_iter,
        M=precond,
        callback=count,
    )
    if info != 0 or np.linalg.norm(b - A @ x) > config.linear_tol * b_norm:
        # Krylov stalled (or its recursive residual drifted); factorize instead.
        x = spsolve(A.tocsc(), b)
        if np.linalg.norm(b - A @ x) > config.linear_tol * b_norm:
            raise LinearSolverError(
                f"relative residual {np.linalg.norm(b - A @ x) / b_norm:.3e} "
                f"exceeds tolerance {config.linear_tol:.3e}"
            )
    return x, iters


# scheme pieces --------------------------------------------------------------


def compute_dt(
    state: State, model: GasModel, mesh: MeshTopology, config: SolverConfig
) -> float:
    """Acoustic CFL time step: cfl * h / max(|u| + c), optionally capped."""
    wave = state.speed() + sound_speed(model, state.rho.data)
    fastest = float(wave.max())
    if not math.isfinite(fastest):
        raise SolverError("non-finite wave speed in time step control")
    dt = config.cfl * mesh.h / fastest
    if config.dt_cap is not None:
        dt = min(dt, config.dt_cap)
    return dt


def _pressure_face_gradient(mesh: MeshTopology, p: np.ndarray) -> np.ndarray:
    """Per component i: difference of the face-averaged pressure over the two
    axis-i faces of each cell, divided by h_i.  Shape (dim, *shape)."""
    out = np.empty((mesh.dim,) + mesh.shape)
    for axis in range(mesh.dim):
        pbar = face_average(p, axis)
        out[axis] = (pbar - np.roll(pbar, 1, axis=axis)) / mesh.h_axis[axis]
    return out


def _flux_divergence(mesh: MeshTopology, flux_axis_arrays) -> np.ndarray:
    """Signed sum of stored face fluxes over each cell, times |sigma|/|K|."""
    out = 0.0
    for axis, f in enumerate(flux_axis_arrays):
        roll_axis = f.ndim - mesh.dim + axis  # supports (…, *shape) stacks
        out = out + (f - np.roll(f, 1, axis=roll_axis)) / mesh.h_axis[axis]
    return out


def solve_continuity(
    rho_prev: ScalarField,
    u_frozen: VectorField,
    dt: float,
    params: FluxParams,
    config: SolverConfig = SolverConfig(),
    workspace: Optional[_Workspace] = None,
    _conv: Optional[sparse.csr_matrix] = None,
) -> tuple[ScalarField, int]:
    """Backward Euler continuity update with the velocity frozen.

    Implicit in the new density through the upwind-diffusive flux; conserves
    total mass to the linear tolerance and keeps the density positive.
    Returns the new density and the Krylov iteration count.
    """
    mesh = rho_prev.mesh
    ws = workspace or _Workspace(mesh)
    conv = _conv if _conv is not None else _convection_matrix(ws, u_frozen, params)
    n = mesh.cell_count
    A = (sparse.identity(n, format="csr") + dt * conv).tocsr()
    b = rho_prev.data.ravel()
    x, iters = _solve_linear(A, b, b.copy(), config)
    if x.min() <= 0.0:
        raise PositivityError(
            f"continuity update lost positivity (min rho = {x.min():.3e}); "
            "linear tolerance too loose for this step"
        )
    return ScalarField(mesh, x.reshape(mesh.shape)), iters


def solve_momentum(
    state_prev: State,
    rho_new: ScalarField,
    u_frozen: VectorField,
    dt: float,
    model: GasModel,
    forcing: Forcing,
    params: FluxParams,
    config: SolverConfig = SolverConfig(),
    workspace: Optional[_Workspace] = None,
    _conv: Optional[sparse.csr_matrix] = None,
) -> tuple[VectorField, int]:
    """Backward Euler momentum update at frozen advecting velocity.

    The transported momentum is implicit (columns of the transport matrix are
    scaled by the new density), the pressure uses the current density iterate,
    and the viscous terms couple all velocity components.  Forcing is sampled
    at cell centers at the new time level.
    """
    mesh = state_prev.mesh
    ws = workspace or _Workspace(mesh)
    conv = _conv if _conv is not None else _convection_matrix(ws, u_frozen, params)
    n = mesh.cell_count
    d = mesh.dim

    rho_flat = rho_new.data.ravel()
    if rho_flat.min() <= 0.0:
        raise PositivityError("momentum solve requires a positive density")
    transport = sparse.diags(rho_flat / dt) + conv @ sparse.diags(rho_flat)
    A = (sparse.kron(sparse.identity(d), transport) + ws.viscous_block(model)).tocsr()

    pgrad = _pressure_face_gradient(mesh, pressure(model, rho_new.data))
    f = forcing.sample_cells(mesh, state_prev.time + dt)
    rhs = state_prev.momentum() / dt + f - pgrad
    x0 = u_frozen.data.reshape(d, -1).ravel()
    x, iters = _solve_linear(A, rhs.reshape(d, -1).ravel(), x0, config)
    return VectorField(mesh, x.reshape((d,) + mesh.shape)), iters


def scheme_residual(
    state_prev: State,
    state_next: State,
    dt: float,
    model: GasModel,
    forcing: Forcing,
    params: FluxParams,
) -> float:
    """Max-norm residual of the fully coupled per-cell update equations.

    Evaluated directly from the stored face fluxes of the *new* state, so it
    is an independent check on the matrix assembly path.
    """
    mesh = state_prev.mesh
    rho_n, u_n = state_next.rho, state_next.u

    fm = mass_flux(mesh, rho_n, u_n, params)
    res_c = (rho_n.data - state_prev.rho.data) / dt + _flux_divergence(
        mesh, [f.data for f in fm]
    )

    fmom = momentum_flux(mesh, rho_n, u_n, params)
    visc = np.stack([laplace_h(u_n.component(j)).data for j in range(mesh.dim)])
    divu = div_h(u_n).data
    div_pen = np.empty((mesh.dim,) + mesh.shape)
    for axis in range(mesh.dim):
        dbar = face_average(divu, axis)
        div_pen[axis] = (dbar - np.roll(dbar, 1, axis=axis)) / mesh.h_axis[axis]
    res_m = (
        (state_next.momentum() - state_prev.momentum()) / dt
        + _flux_divergence(mesh, fmom)
        + _pressure_face_gradient(mesh, pressure(model, rho_n.data))
        - model.mu * visc
        - (model.mu + model.lam) * div_pen
        - forcing.sample_cells(mesh, state_next.time)
    )
    return max(float(np.abs(res_c).max()), float(np.abs(res_m).max()))


def picard_step(
    state_prev: State,
    dt: float,
    model: GasModel,
    forcing: Forcing,
    config: SolverConfig,
    params: FluxParams,
    workspace: Optional[_Workspace] = None,
) -> tuple[State, StepReport]:
    """One backward Euler step solved by fixed-point iteration.

    Alternates the continuity and momentum sub-solves at frozen advecting
    velocity until the relative sup-norm increments of both unknowns drop
    below ``picard_tol``.  Raises :class:`PicardConvergenceError` when the
    iteration cap is exhausted (the caller may retry with a smaller step).
    """
    mesh = state_prev.mesh
    ws = workspace or _Workspace(mesh)
    rho_prev, u_prev = state_prev.rho, state_prev.u
    t_next = state_prev.time + dt

    u_m = u_prev
    rho_m = rho_prev
    linear_total = 0
    increment = math.inf
    for it in range(1, config.picard_max_iter + 1):
        conv = _convection_matrix(ws, u_m, params)
        rho_next, li1 = solve_continuity(
            rho_prev, u_m, dt, params, config, ws, _conv=conv
        )
        u_next, li2 = solve_momentum(
            state_prev, rho_next, u_m, dt, model, forcing, params, config, ws,
            _conv=conv,
        )
        linear_total += li1 + li2
        du = np.abs(u_next.data - u_m.data).max() / (1.0 + np.abs(u_next.data).max())
        drho = np.abs(rho_next.data - rho_m.data).max() / (
            1.0 + np.abs(rho_next.data).max()
        )
        increment = max(du, drho)
        u_m, rho_m = u_next, rho_next
        if increment <= config.picard_tol:
            break
    else:
        raise PicardConvergenceError(
            f"fixed point not reached in {config.picard_max_iter} iterations "
            f"(last increment {increment:.3e}, dt = {dt:.3e})"
        )

    state_next = State(t_next, rho_m, u_m)
    residual = scheme_residual(state_prev, state_next, dt, model, forcing, params)
    budget = diagnostics.energy_budget(state_prev, state_next, dt, model, params, mesh)
    report = StepReport(
        t=t_next,
        dt=dt,
        picard_iters=it,
        picard_residual=increment,
        nonlinear_residual=residual,
        linear_iters=linear_total,
        mass=diagnostics.total_mass(state_next),
        energy=budget.total_energy,
        energy_slack=budget.balance_slack,
        min_rho=float(rho_m.data.min()),
        max_u=float(state_next.speed().max()),
    )
    return state_next, report


@dataclass
class RunResult:
    states: list
    reports: list = field(default_factory=list)

    @property
    def final_state(self) -> State:
        return self.states[-1]


_MAX_DT_RETRIES = 3


def initial_state(case, mesh: MeshTopology) -> State:
    """Cell-mean projection of the case's initial data."""
    rho0 = project_cell(mesh, case.rho0)
    u0 = project_cell_vector(mesh, case.u0)
    return State(0.0, rho0, u0)


def run(
    case,
    mesh: MeshTopology,
    model: GasModel,
    config: SolverConfig,
    params: FluxParams,
    on_step: Optional[Callable[[int, State, StepReport], None]] = None,
    keep_states: bool = True,
) -> RunResult:
    """Advance the case from t = 0 to its final time.

    The step size follows the CFL rule each step and the last step is clipped
    to land exactly on the final time.  On a fixed-point failure the step is
    retried with a halved dt up to three times before the run aborts.
    ``on_step`` receives every accepted step, which allows streaming
    consumers to avoid storing the full series (``keep_states=False``).
    """
    state = initial_state(case, mesh)
    t_final = case.t_final
    result = RunResult(states=[state] if keep_states else [state])
    ws = _Workspace(mesh)

    step = 0
    while True:
        remaining = t_final - state.time
        if remaining <= 1e-14 * max(1.0, t_final):
            break
        dt = compute_dt(state, model, mesh, config)
        clipped = dt >= remaining
        dt = min(dt, remaining)
        for attempt in range(_MAX_DT_RETRIES + 1):
            try:
                state_next, report = picard_step(
                    state, dt, model, case.forcing, config, params, ws
                )
                break
            except PicardConvergenceError:
                if attempt == _MAX_DT_RETRIES:
                    raise
                dt *= 0.5
                clipped = False
        if clipped:
            state_next.time = t_final
            report.t = t_final
        state = state_next
        step += 1
        if keep_states:
            result.states.append(state)
        else:
            result.states[-1] = state
        result.reports.append(report)
        if on_step is not None:
            on_step(step, state, report)
    return result
