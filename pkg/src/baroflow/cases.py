"""Benchmark definitions: initial data, forcing and reference solutions.

Two cases ship with the package.  The manufactured case prescribes a smooth
time-periodic flow whose momentum ballast is supplied analytically, so
accuracy can be measured against closed-form fields.  The vortex case is the
standard rotating-flow benchmark with a piecewise-linear azimuthal profile;
it has no closed-form reference and convergence is measured against a finer
run.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable, Optional

import numpy as np

from .model import Forcing, GasModel

TWO_PI = 2.0 * np.pi


@dataclass
class BenchmarkCase:
    name: str
    dim: int
    rho0: Callable[[np.ndarray], np.ndarray]
    u0: Callable[[np.ndarray], np.ndarray]
    forcing: Forcing
    t_final: float
    model: GasModel
    exact_rho: Optional[Callable[[float, np.ndarray], np.ndarray]] = None
    exact_u: Optional[Callable[[float, np.ndarray], np.ndarray]] = None
    exact_grad_u: Optional[Callable[[float, np.ndarray], np.ndarray]] = None

    @property
    def has_exact_solution(self) -> bool:
        return self.exact_rho is not None

    def with_final_time(self, t_final: float) -> "BenchmarkCase":
        return replace(self, t_final=t_final)


DEFAULT_MODEL = GasModel(gamma=1.4, mu=0.01, lam=0.01, a=1.0)


def manufactured_case(model: GasModel = DEFAULT_MODEL, t_final: float = 1.0) -> BenchmarkCase:
    """Forced 2D flow with a stationary density wave and oscillating velocity.

    Density 2 + cos(2 pi (x+y)) and velocity sin(2 pi t)/density * (1, -1).
    The momentum rho*u = sin(2 pi t) (1, -1) is spatially constant and the
    density is stationary, so the continuity equation holds with no source;
    the flow is also divergence free, which kills the convective and
    divergence-viscosity contributions to the forcing.  What remains is

        f = d/dt(rho u) + grad p(rho) - mu * Laplacian(u),

    assembled below in closed form.
    """
    a, gamma, mu = model.a, model.gamma, model.mu

    def rho_exact(t, x):
        return 2.0 + np.cos(TWO_PI * (x[0] + x[1]))

    def u_exact(t, x):
        g = 1.0 / (2.0 + np.cos(TWO_PI * (x[0] + x[1])))
        s = np.sin(TWO_PI * t)
        return np.stack((s * g, -s * g))

    def grad_u_exact(t, x):
        # d/dx_i of u_j; both components depend on x only through w = x + y
        w = x[0] + x[1]
        denom = 2.0 + np.cos(TWO_PI * w)
        gp = TWO_PI * np.sin(TWO_PI * w) / denom**2
        s = np.sin(TWO_PI * t)
        row = np.stack((s * gp, -s * gp))  # (d/dw) of (u1, u2)
        return np.stack((row, row))

    def forcing_func(t, x):
        w = x[0] + x[1]
        cosw = np.cos(TWO_PI * w)
        sinw = np.sin(TWO_PI * w)
        denom = 2.0 + cosw
        rho = denom
        s = np.sin(TWO_PI * t)
        ds = TWO_PI * np.cos(TWO_PI * t)
        # second derivative of 1/(2 + cos(2 pi w)) w.r.t. w
        gpp = TWO_PI**2 * (cosw / denom**2 + 2.0 * sinw**2 / denom**3)
        dp = a * gamma * rho ** (gamma - 1.0) * (-TWO_PI * sinw)
        f1 = ds + dp - 2.0 * mu * s * gpp
        f2 = -ds + dp + 2.0 * mu * s * gpp
        return np.stack((f1, f2))

    return BenchmarkCase(
        name="manufactured",
        dim=2,
        rho0=lambda x: rho_exact(0.0, x),
        u0=lambda x: u_exact(0.0, x),
        forcing=Forcing(forcing_func),
        t_final=t_final,
        model=model,
        exact_rho=rho_exact,
        exact_u=u_exact,
        exact_grad_u=grad_u_exact,
    )


GRESHO_RADIUS = 0.2
GRESHO_CENTER = (0.5, 0.5)


def gresho_speed(r, gamma: float):
    """Azimuthal speed profile: linear spin-up, linear decay, zero outside."""
    r = np.asarray(r, dtype=float)
    amp = np.sqrt(gamma)
    inner = 2.0 * r / GRESHO_RADIUS
    outer = 2.0 * (1.0 - r / GRESHO_RADIUS)
    return amp * np.where(r < GRESHO_RADIUS / 2, inner, np.where(r < GRESHO_RADIUS, outer, 0.0))


def gresho_case(model: GasModel = DEFAULT_MODEL, t_final: float = 0.2) -> BenchmarkCase:
    """Rotating vortex of radius 0.2 centered at (0.5, 0.5), unit density."""

    def u0(x):
        dx = x[0] - GRESHO_CENTER[0]
        dy = x[1] - GRESHO_CENTER[1]
        r = np.sqrt(dx**2 + dy**2)
        with np.errstate(invalid="ignore", divide="ignore"):
            scale = np.where(r > 0.0, gresho_speed(r, model.gamma) / np.where(r > 0.0, r, 1.0), 0.0)
        return np.stack((dy * scale, -dx * scale))

    return BenchmarkCase(
        name="gresho",
        dim=2,
        rho0=lambda x: np.ones_like(x[0]),
        u0=u0,
        forcing=Forcing.zero(),
        t_final=t_final,
        model=model,
    )


CASE_FACTORIES = {
    "manufactured": manufactured_case,
    "experiment1": manufactured_case,
    "gresho": gresho_case,
    "experiment2": gresho_case,
}


def make_case(name: str, model: GasModel = DEFAULT_MODEL) -> BenchmarkCase:
    try:
        factory = CASE_FACTORIES[name]
    except KeyError:
        known = ", ".join(sorted(CASE_FACTORIES))
        raise ValueError(f"unknown case {name!r}; known cases: {known}") from None
    return factory(model=model)
