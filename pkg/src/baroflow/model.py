"""Isentropic gas closure and the momentum forcing interface."""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .grid import MeshTopology


@dataclass(frozen=True)
class GasModel:
    """Pressure law p = a * rho**gamma plus the two viscosity coefficients.

    The convergence theory behind the scheme assumes gamma in (1, 2); values
    outside that range are legal inputs but trigger a warning.
    """

    gamma: float
    mu: float
    lam: float
    a: float = 1.0

    def __post_init__(self):
        if self.a <= 0.0:
            raise ValueError(f"pressure coefficient a must be > 0, got {self.a}")
        if self.gamma <= 1.0:
            raise ValueError(f"adiabatic exponent must be > 1, got {self.gamma}")
        if self.mu <= 0.0:
            raise ValueError(f"shear viscosity must be > 0, got {self.mu}")
        if self.lam < -self.mu:
            raise ValueError(
                f"bulk viscosity must satisfy lambda >= -mu, got {self.lam} < {-self.mu}"
            )
        if not 1.0 < self.gamma < 2.0:
            warnings.warn(
                f"gamma = {self.gamma} is outside (1, 2); the scheme still runs "
                "but the convergence theory does not cover it",
                stacklevel=2,
            )


def _check_nonnegative(rho):
    if np.any(np.asarray(rho) < 0.0):
        raise ValueError("density must be nonnegative")


def pressure(model: GasModel, rho):
    """p(rho) = a * rho**gamma; rejects negative density."""
    _check_nonnegative(rho)
    return model.a * rho**model.gamma


def pressure_potential(model: GasModel, rho):
    """Internal-energy density a * rho**gamma / (gamma - 1); convex for gamma > 1."""
    _check_nonnegative(rho)
    return model.a * rho**model.gamma / (model.gamma - 1.0)


def sound_speed(model: GasModel, rho):
    """c(rho) = sqrt(gamma * p / rho) = sqrt(gamma * a * rho**(gamma-1))."""
    if np.any(np.asarray(rho) <= 0.0):
        raise ValueError("sound speed needs strictly positive density")
    return np.sqrt(model.gamma * model.a * rho ** (model.gamma - 1.0))


class Forcing:
    """Momentum source as a function of time and position.

    The callable receives ``(t, x)`` with ``x`` of shape (dim, ...) and must
    return an array of shape (dim, ...).  ``Forcing.zero()`` is the default
    no-source term.
    """

    def __init__(self, func: Optional[Callable[[float, np.ndarray], np.ndarray]] = None):
        self.func = func

    @classmethod
    def zero(cls) -> "Forcing":
        return cls(None)

    @property
    def is_zero(self) -> bool:
        return self.func is None

    def __call__(self, t: float, x: np.ndarray) -> np.ndarray:
        if self.func is None:
            return np.zeros_like(x)
        return np.asarray(self.func(t, x), dtype=float)

    def sample_cells(self, mesh: MeshTopology, t: float) -> np.ndarray:
        """Cell-constant source values: the forcing evaluated at cell centers."""
        if self.func is None:
            return np.zeros((mesh.dim,) + mesh.shape)
        return self(t, mesh.cell_centers())
