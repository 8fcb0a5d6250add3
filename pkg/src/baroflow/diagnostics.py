"""Monitored quantities, error norms against reference solutions, and EOC.

The energy budget mirrors the scheme's discrete stability identity: for a
zero-forcing run the time increment of the total energy plus the three
dissipation terms (jump penalty, velocity-gradient, divergence) must not be
positive beyond solver-tolerance slack.  Error norms are the time-integrated
relative norms used by the convergence tables; their time weights are the
actual adaptive step sizes, matching the piecewise-constant-in-time reading
of the discrete solution.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .fields import (
    ScalarField,
    VectorField,
    face_average,
    face_jump,
    integrate_cells,
    lp_norm,
    project_cell,
    project_cell_vector,
)
from .flux import FluxParams
from .grid import MeshTopology
from .model import GasModel, pressure_potential
from .operators import div_h, grad_edge_vector


def total_mass(state) -> float:
    """Integral of the density over the torus."""
    return integrate_cells(state.mesh, state.rho.data)


def total_energy(state, model: GasModel) -> float:
    """Kinetic plus internal energy, integrated over the torus."""
    kin = 0.5 * state.rho.data * (state.u.data**2).sum(axis=0)
    return integrate_cells(state.mesh, kin + pressure_potential(model, state.rho.data))


def jump_penalty_dissipation(state, params: FluxParams) -> float:
    """h**eps times the face sum of (density average) |velocity jump|^2."""
    mesh = state.mesh
    acc = 0.0
    for axis in range(mesh.dim):
        rbar = face_average(state.rho.data, axis)
        jump_sq = (face_jump(state.u.data, axis + 1) ** 2).sum(axis=0)
        acc += mesh.face_area(axis) * float((rbar * jump_sq).sum())
    return params.h_eps * acc


def velocity_gradient_norm_sq(state) -> float:
    """Squared L2 norm of the edge gradient of the velocity."""
    g = grad_edge_vector(state.u)
    return state.mesh.cell_volume * float((g**2).sum())


@dataclass
class EnergyBudget:
    """One step of the discrete energy balance.

    ``balance_slack`` is the defect D_t(total energy) + dissipation terms; it
    must not exceed solver-tolerance slack on zero-forcing runs, and the two
    quadratic dissipation terms are nonnegative by construction.
    """

    total_energy: float
    eps_dissipation: float
    viscous_grad: float
    viscous_div: float
    balance_slack: float


def energy_budget(
    state_prev, state_next, dt: float, model: GasModel, params: FluxParams,
    mesh: Optional[MeshTopology] = None,
) -> EnergyBudget:
    mesh = mesh or state_next.mesh
    e_prev = total_energy(state_prev, model)
    e_next = total_energy(state_next, model)
    eps_d = jump_penalty_dissipation(state_next, params)
    vgrad = model.mu * velocity_gradient_norm_sq(state_next)
    divu = div_h(state_next.u).data
    vdiv = (model.mu + model.lam) * integrate_cells(mesh, divu**2)
    slack = (e_next - e_prev) / dt + eps_d + vgrad + vdiv
    return EnergyBudget(e_next, eps_d, vgrad, vdiv, slack)


def eoc(e_coarse: float, e_fine: float) -> float:
    """Experimental order of convergence under mesh halving."""
    if e_coarse <= 0.0 or e_fine <= 0.0:
        raise ValueError("EOC needs strictly positive errors")
    return math.log2(e_coarse / e_fine)


# error norms ---------------------------------------------------------------

ERROR_KEYS = ("grad_u", "u", "rho_l1", "rho_linf_lgamma")


@dataclass
class ErrorReport:
    """Relative space-time errors of one run against a reference."""

    h: float
    grad_u: float      # L2(L2) of the edge gradient
    u: float           # L2(L2) of the velocity
    rho_l1: float      # L1(L1) of the density
    rho_linf_lgamma: float  # Linf(L^gamma) of the density

    def value(self, key: str) -> float:
        return getattr(self, key)


class ErrorAccumulator:
    """Streams per-step error contributions for the four table norms."""

    def __init__(self, mesh: MeshTopology, gamma: float):
        self.mesh = mesh
        self.gamma = gamma
        self._err_u = 0.0
        self._ref_u = 0.0
        self._err_grad = 0.0
        self._ref_grad = 0.0
        self._err_rho_l1 = 0.0
        self._ref_rho_l1 = 0.0
        self._err_rho_lg = 0.0
        self._ref_rho_lg = 0.0

    def add(self, state, dt: float, ref_rho: np.ndarray, ref_u: np.ndarray,
            ref_grad: np.ndarray) -> None:
        """Accumulate one step; reference arrays live on this mesh already."""
        mesh = self.mesh
        vol = mesh.cell_volume

        d_rho = state.rho.data - ref_rho
        self._err_rho_l1 += dt * lp_norm(mesh, d_rho, 1)
        self._ref_rho_l1 += dt * lp_norm(mesh, ref_rho, 1)
        self._err_rho_lg = max(self._err_rho_lg, lp_norm(mesh, d_rho, self.gamma))
        self._ref_rho_lg = max(self._ref_rho_lg, lp_norm(mesh, ref_rho, self.gamma))

        d_u = state.u.data - ref_u
        self._err_u += dt * vol * float((d_u**2).sum())
        self._ref_u += dt * vol * float((ref_u**2).sum())

        g = grad_edge_vector(state.u)
        self._err_grad += dt * vol * float(((g - ref_grad) ** 2).sum())
        self._ref_grad += dt * vol * float((ref_grad**2).sum())

    def report(self) -> ErrorReport:
        for name, ref in (
            ("u", self._ref_u),
            ("grad_u", self._ref_grad),
            ("rho_l1", self._ref_rho_l1),
            ("rho_linf_lgamma", self._ref_rho_lg),
        ):
            if ref == 0.0:
                raise ValueError(f"reference norm for {name} is zero")
        return ErrorReport(
            h=self.mesh.h,
            grad_u=math.sqrt(self._err_grad / self._ref_grad),
            u=math.sqrt(self._err_u / self._ref_u),
            rho_l1=self._err_rho_l1 / self._ref_rho_l1,
            rho_linf_lgamma=self._err_rho_lg / self._ref_rho_lg,
        )


class ExactReference:
    """Reference fields from closed-form solutions of a benchmark case.

    Density and velocity are compared after cell-mean projection (both sides
    then live in the same piecewise-constant space); the velocity gradient is
    evaluated at face centers, where the edge gradient is anchored.
    """

    def __init__(self, case, mesh: MeshTopology):
        if case.exact_rho is None:
            raise ValueError(f"case {case.name!r} has no exact solution")
        self.case = case
        self.mesh = mesh
        self._face_centers = [mesh.face_centers(a) for a in range(mesh.dim)]

    def rho(self, t: float) -> np.ndarray:
        return project_cell(self.mesh, lambda x: self.case.exact_rho(t, x)).data

    def u(self, t: float) -> np.ndarray:
        return project_cell_vector(self.mesh, lambda x: self.case.exact_u(t, x)).data

    def grad_u(self, t: float) -> np.ndarray:
        out = np.empty((self.mesh.dim, self.mesh.dim) + self.mesh.shape)
        for axis in range(self.mesh.dim):
            full = np.asarray(self.case.exact_grad_u(t, self._face_centers[axis]))
            out[axis] = full[axis]
        return out

    def add_to(self, acc: ErrorAccumulator, state, dt: float) -> None:
        t = state.time
        acc.add(state, dt, self.rho(t), self.u(t), self.grad_u(t))


def restrict_to_coarse(values: np.ndarray, coarse_shape: tuple[int, ...]) -> np.ndarray:
    """Exact cell-mean aggregation of nested fine cells onto a coarse grid.

    Works on (*fine_shape) arrays or stacks (…, *fine_shape); requires every
    fine axis count to be a multiple of the coarse one.
    """
    lead = values.shape[: values.ndim - len(coarse_shape)]
    fine_shape = values.shape[len(lead):]
    inter = list(lead)
    for nf, nc in zip(fine_shape, coarse_shape):
        if nf % nc:
            raise ValueError(f"meshes are not nested: {fine_shape} onto {coarse_shape}")
        inter.extend((nc, nf // nc))
    out = values.reshape(inter)
    for k in range(len(coarse_shape)):
        out = out.mean(axis=len(lead) + k + 1)
    return out


class FineReferenceConsumer:
    """Feeds stored coarse runs with a streamed fine-grid reference run.

    The reference is read as a piecewise-constant function of time: a coarse
    state at time t is compared against the last reference state with time
    <= t.  Reference fields are restricted to each coarse mesh by cell-mean
    aggregation and the reference velocity gradient is the edge gradient of
    the restricted velocity.
    """

    def __init__(self, ref_initial_state, entries):
        # entries: list of (ErrorAccumulator, states[1:], dts) per coarse level
        self._prev = ref_initial_state
        self._entries = [
            {"acc": acc, "states": states, "dts": dts, "ptr": 0}
            for acc, states, dts in entries
        ]

    def _consume_until(self, t_limit: float) -> None:
        for e in self._entries:
            acc, states, dts = e["acc"], e["states"], e["dts"]
            while e["ptr"] < len(states) and states[e["ptr"]].time < t_limit:
                self._feed(acc, states[e["ptr"]], dts[e["ptr"]])
                e["ptr"] += 1

    def _feed(self, acc: ErrorAccumulator, state, dt: float) -> None:
        shape = acc.mesh.shape
        ref_rho = restrict_to_coarse(self._prev.rho.data, shape)
        ref_u = restrict_to_coarse(self._prev.u.data, shape)
        ref_grad = grad_edge_vector(VectorField(acc.mesh, ref_u))
        acc.add(state, dt, ref_rho, ref_u, ref_grad)

    def on_ref_step(self, step: int, ref_state, report) -> None:
        self._consume_until(ref_state.time)
        self._prev = ref_state

    def finalize(self) -> None:
        self._consume_until(math.inf)


def error_norms(states, dts, reference, mesh: MeshTopology, gamma: float) -> ErrorReport:
    """Relative errors of a stored run against an exact-solution reference.

    ``states`` are the post-step states (initial state excluded) and ``dts``
    the matching step sizes.
    """
    acc = ErrorAccumulator(mesh, gamma)
    for state, dt in zip(states, dts):
        reference.add_to(acc, state, dt)
    return acc.report()


# EOC table -----------------------------------------------------------------

EOC_COLUMNS = [
    "h",
    "e_grad_u", "eoc_grad_u",
    "e_u", "eoc_u",
    "e_rho_l1", "eoc_rho_l1",
    "e_rho_linf_lgamma", "eoc_rho_linf_lgamma",
]


@dataclass
class EocRow:
    h: float
    errors: ErrorReport
    rates: Optional[dict] = None  # key -> EOC vs the previous (coarser) row


def build_eoc_table(reports: list[ErrorReport]) -> list[EocRow]:
    rows = []
    for k, rep in enumerate(reports):
        rates = None
        if k > 0:
            prev = reports[k - 1]
            rates = {key: eoc(prev.value(key), rep.value(key)) for key in ERROR_KEYS}
        rows.append(EocRow(rep.h, rep, rates))
    return rows


def write_eoc_csv(path, rows: list[EocRow]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(EOC_COLUMNS)
        for row in rows:
            record = [repr(row.h)]
            for key in ERROR_KEYS:
                record.append(repr(row.errors.value(key)))
                record.append("" if row.rates is None else repr(row.rates[key]))
            writer.writerow(record)


def read_eoc_csv(path) -> list[EocRow]:
    rows = []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != EOC_COLUMNS:
            raise ValueError(f"unexpected EOC header {header}")
        for record in reader:
            h = float(record[0])
            vals = {}
            rates = {}
            for k, key in enumerate(ERROR_KEYS):
                vals[key] = float(record[1 + 2 * k])
                cell = record[2 + 2 * k]
                if cell:
                    rates[key] = float(cell)
            rep = ErrorReport(h=h, **{k: vals[k] for k in ERROR_KEYS})
            rows.append(EocRow(h, rep, rates or None))
    return rows


class RunMonitor:
    """Aggregates the stability quantities that stay bounded under refinement:
    sup-in-time L^gamma norm of the density, space-time L2 norm of the edge
    velocity gradient, and the accumulated jump-penalty dissipation."""

    def __init__(self, mesh: MeshTopology, gamma: float, params: FluxParams):
        self.mesh = mesh
        self.gamma = gamma
        self.params = params
        self.rho_linf_lgamma = 0.0
        self._grad_sq = 0.0
        self._jump = 0.0

    def update(self, state, dt: float) -> None:
        self.rho_linf_lgamma = max(
            self.rho_linf_lgamma, lp_norm(self.mesh, state.rho.data, self.gamma)
        )
        self._grad_sq += dt * velocity_gradient_norm_sq(state)
        self._jump += dt * jump_penalty_dissipation(state, self.params)

    @property
    def grad_u_l2l2(self) -> float:
        return math.sqrt(self._grad_sq)

    @property
    def jump_dissipation(self) -> float:
        return self._jump
