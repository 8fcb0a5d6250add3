"""Face flux kernels: upwind transport plus a mesh-dependent jump penalty.

The scalar kernel takes the two one-sided trace values and the normal
component of the face-averaged velocity; the whole-mesh assemblers evaluate
it for every face of every axis at once.  Each face value is computed once
and consumed by both adjacent cells, so discrete conservation holds exactly
regardless of floating-point non-associativity.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .fields import FaceField, ScalarField, VectorField, face_average, face_out
from .grid import MeshTopology


def epsilon_bound(gamma: float) -> float:
    """Largest admissible jump-penalty exponent for a given adiabatic exponent."""
    return min(1.0, 2.0 * (gamma - 1.0))


@dataclass(frozen=True)
class FluxParams:
    """Jump-penalty exponent and the mesh size it is raised against.

    The upper bound on ``epsilon`` depends on the gas model and is enforced
    where the model is known (see :func:`baroflow.config.validate`); here we
    only require a positive exponent and a mesh size in (0, 1).
    """

    epsilon: float
    h: float

    def __post_init__(self):
        if not 0.0 < self.epsilon:
            raise ValueError(f"epsilon must be positive, got {self.epsilon}")
        if not 0.0 < self.h < 1.0:
            raise ValueError(f"mesh size must lie in (0, 1), got {self.h}")

    @property
    def h_eps(self) -> float:
        """The jump-penalty coefficient h**epsilon."""
        return self.h**self.epsilon


def positive_part(f):
    return 0.5 * (f + np.abs(f))


def negative_part(f):
    return 0.5 * (f - np.abs(f))


def upwind(r_in, r_out, vbar_n):
    """Upwind flux: the trace on the side the averaged velocity comes from,
    times that velocity.  Ties (vbar_n == 0) take the in side; the value is
    zero there either way, so the kernel is continuous in vbar_n."""
    r_up = np.where(np.asarray(vbar_n) >= 0.0, r_in, r_out)
    out = r_up * vbar_n
    return float(out) if np.isscalar(vbar_n) else out


def upwind_average_form(r_in, r_out, vbar_n):
    """Algebraically equal form: average transport minus half |v| times the jump."""
    return 0.5 * (r_in + r_out) * vbar_n - 0.5 * np.abs(vbar_n) * (r_out - r_in)


def upwind_splitting_form(r_in, r_out, vbar_n):
    """Algebraically equal form via the positive/negative velocity split."""
    return r_in * positive_part(vbar_n) + r_out * negative_part(vbar_n)


def diffusive_flux(r_in, r_out, vbar_n, params: FluxParams):
    """Upwind flux with the h**epsilon jump penalty subtracted."""
    return upwind(r_in, r_out, vbar_n) - params.h_eps * (r_out - r_in)


def _normal_velocity(u: VectorField, axis: int) -> np.ndarray:
    """Face-averaged velocity component normal to the axis faces."""
    return face_average(u.data[axis], axis)


def mass_flux(
    mesh: MeshTopology, rho: ScalarField, u: VectorField, params: FluxParams
) -> list[FaceField]:
    """Diffusive upwind flux of the density through every face, per axis."""
    out = []
    for axis in range(mesh.dim):
        vbar = _normal_velocity(u, axis)
        out.append(
            FaceField(
                mesh,
                axis,
                diffusive_flux(rho.data, face_out(rho.data, axis), vbar, params),
            )
        )
    return out


def momentum_flux(
    mesh: MeshTopology, rho: ScalarField, u: VectorField, params: FluxParams
) -> list[np.ndarray]:
    """Componentwise diffusive upwind flux of the momentum rho*u.

    Returns one (dim, *shape) array per axis: entry [j] is the flux of the
    j-th momentum component through the faces of that axis.
    """
    m = rho.data[None, ...] * u.data
    out = []
    for axis in range(mesh.dim):
        vbar = _normal_velocity(u, axis)[None, ...]
        out.append(diffusive_flux(m, face_out(m, axis + 1), vbar, params))
    return out
