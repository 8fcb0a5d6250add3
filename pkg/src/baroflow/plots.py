"""Figure rendering for the report path: every plot goes straight to a file."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .diagnostics import ERROR_KEYS, EocRow

_ERROR_LABELS = {
    "grad_u": r"$\|e_{\nabla u}\|_{L^2 L^2}$",
    "u": r"$\|e_u\|_{L^2 L^2}$",
    "rho_l1": r"$\|e_\rho\|_{L^1 L^1}$",
    "rho_linf_lgamma": r"$\|e_\rho\|_{L^\infty L^\gamma}$",
}


def plot_history(reports, path) -> None:
    """Total energy and mass drift over the run."""
    t = np.array([r.t for r in reports])
    energy = np.array([r.energy for r in reports])
    mass = np.array([r.mass for r in reports])
    fig, (ax1, ax2) = plt.subplots(2, 1, figsize=(6, 6), sharex=True)
    ax1.plot(t, energy, lw=1.2)
    ax1.set_ylabel("total energy")
    ax1.grid(alpha=0.3)
    ax2.plot(t, mass - mass[0] if len(mass) else mass, lw=1.2)
    ax2.set_ylabel("mass drift")
    ax2.set_xlabel("t")
    ax2.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_state(state, path) -> None:
    """Density and speed of one state; heatmaps in 2D, line plots in 1D."""
    mesh = state.mesh
    speed = state.speed()
    if mesh.dim == 1:
        x = mesh.cell_centers()[0]
        fig, (ax1, ax2) = plt.subplots(2, 1, figsize=(6, 5), sharex=True)
        ax1.plot(x, state.rho.data, lw=1.2)
        ax1.set_ylabel("rho")
        ax2.plot(x, state.u.data[0], lw=1.2)
        ax2.set_ylabel("u")
        ax2.set_xlabel("x")
    elif mesh.dim == 2:
        fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(10, 4.2))
        for ax, data, label in ((ax1, state.rho.data, "rho"), (ax2, speed, "|u|")):
            im = ax.imshow(
                data.T, origin="lower", extent=(0, 1, 0, 1), cmap="viridis"
            )
            ax.set_title(f"{label} at t = {state.time:.4g}")
            fig.colorbar(im, ax=ax, shrink=0.85)
    else:
        # mid-plane slice for 3D runs
        k = mesh.shape[2] // 2
        fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(10, 4.2))
        for ax, data, label in (
            (ax1, state.rho.data[:, :, k], "rho"),
            (ax2, speed[:, :, k], "|u|"),
        ):
            im = ax.imshow(data.T, origin="lower", extent=(0, 1, 0, 1), cmap="viridis")
            ax.set_title(f"{label} mid-slice at t = {state.time:.4g}")
            fig.colorbar(im, ax=ax, shrink=0.85)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_eoc(rows: list[EocRow], path) -> None:
    """Log-log error decay per norm with a first-order guide line."""
    h = np.array([row.h for row in rows])
    fig, ax = plt.subplots(figsize=(6, 4.5))
    for key in ERROR_KEYS:
        ax.loglog(h, [row.errors.value(key) for row in rows], "o-", label=_ERROR_LABELS[key])
    anchor = rows[0].errors.value("u")
    ax.loglog(h, anchor * h / h[0], "k--", lw=0.8, label=r"$O(h)$")
    ax.set_xlabel("h")
    ax.set_ylabel("relative error")
    ax.grid(alpha=0.3, which="both")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
