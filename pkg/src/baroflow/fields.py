"""Piecewise-constant fields on the primary and dual grids.

Cell data (density, velocity components) is stored as one plain contiguous
float64 array per field in C order, so ``.ravel()`` walks the cells
lexicographically.  Face data lives on the dual grid of one axis and shares
the cell array shape: entry ``j`` of an axis-``i`` face field belongs to the
face between cells ``j`` and ``j + e_i``.  Traces, jumps and averages are
always computed on the fly from the cell arrays; they are never stored.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .grid import FaceId, MeshTopology


@dataclass
class FaceTrace:
    """The two one-sided values of a cell field at a face (in = owner side)."""

    v_in: float
    v_out: float

    @property
    def average(self) -> float:
        return 0.5 * (self.v_in + self.v_out)

    @property
    def jump(self) -> float:
        return self.v_out - self.v_in


@dataclass
class ScalarField:
    mesh: MeshTopology
    data: np.ndarray

    def __post_init__(self):
        self.data = np.ascontiguousarray(self.data, dtype=float)
        if self.data.shape != self.mesh.shape:
            raise ValueError(
                f"data shape {self.data.shape} does not match mesh {self.mesh.shape}"
            )

    def copy(self) -> "ScalarField":
        return ScalarField(self.mesh, self.data.copy())


@dataclass
class VectorField:
    """One ScalarField-shaped component per axis, stacked as (dim, *shape)."""

    mesh: MeshTopology
    data: np.ndarray

    def __post_init__(self):
        self.data = np.ascontiguousarray(self.data, dtype=float)
        expected = (self.mesh.dim,) + self.mesh.shape
        if self.data.shape != expected:
            raise ValueError(f"data shape {self.data.shape}, expected {expected}")

    def component(self, axis: int) -> ScalarField:
        return ScalarField(self.mesh, self.data[axis])

    def copy(self) -> "VectorField":
        return VectorField(self.mesh, self.data.copy())


@dataclass
class FaceField:
    """Piecewise-constant data on the dual cells of one axis."""

    mesh: MeshTopology
    axis: int
    data: np.ndarray

    def __post_init__(self):
        self.data = np.ascontiguousarray(self.data, dtype=float)
        if self.data.shape != self.mesh.shape:
            raise ValueError(
                f"data shape {self.data.shape} does not match mesh {self.mesh.shape}"
            )


# face algebra ------------------------------------------------------------


def face_out(values: np.ndarray, axis: int) -> np.ndarray:
    """Neighbor-side value at every face of ``axis`` (periodic shift)."""
    return np.roll(values, -1, axis=axis)


def face_average(values: np.ndarray, axis: int) -> np.ndarray:
    return 0.5 * (values + face_out(values, axis))


def face_jump(values: np.ndarray, axis: int) -> np.ndarray:
    """Out-minus-in difference across every face of ``axis``."""
    return face_out(values, axis) - values


def trace(fld: ScalarField, face: FaceId) -> FaceTrace:
    """One-sided values of ``fld`` at a single face (owner side first)."""
    mesh = fld.mesh
    owner = mesh.wrap(face.cell)
    nb = list(owner)
    nb[face.axis] += 1
    return FaceTrace(
        float(fld.data[owner]), float(fld.data[mesh.wrap(tuple(nb))])
    )


# projections -------------------------------------------------------------

DEFAULT_REFINE = 4


def _midpoint_samples(mesh: MeshTopology, refine: int, shift: np.ndarray | None):
    """Tensor midpoint sample coordinates, shape (dim, *fine_shape)."""
    axes = []
    for n, hi in zip(mesh.cells_per_axis, mesh.h_axis):
        fine = (np.arange(n * refine) + 0.5) * (hi / refine)
        axes.append(fine)
    pts = np.stack(np.meshgrid(*axes, indexing="ij"))
    if shift is not None:
        pts = (pts + shift.reshape((mesh.dim,) + (1,) * mesh.dim)) % 1.0
    return pts


def _block_mean(fine: np.ndarray, mesh: MeshTopology, refine: int) -> np.ndarray:
    """Average refine^d sub-samples back onto the cells."""
    shape = []
    for n in mesh.cells_per_axis:
        shape.extend((n, refine))
    fine = fine.reshape(shape)
    for k in range(mesh.dim):
        fine = fine.mean(axis=k + 1)  # collapse the refine axes left to right
    return fine


def project_cell(mesh: MeshTopology, f, refine: int = DEFAULT_REFINE) -> ScalarField:
    """Cell-mean projection of a pointwise function onto the primary grid.

    ``f`` receives coordinates as an array of shape (dim, ...) and must
    return values of the trailing shape.  The cell mean is approximated by a
    tensor-product midpoint rule with ``refine`` sub-intervals per axis
    (exact for functions that are constant on each cell, second-order
    accurate otherwise).
    """
    pts = _midpoint_samples(mesh, refine, None)
    vals = np.asarray(f(pts), dtype=float)
    return ScalarField(mesh, _block_mean(vals, mesh, refine))


def project_cell_vector(mesh: MeshTopology, f, refine: int = DEFAULT_REFINE) -> VectorField:
    """Componentwise cell-mean projection of a pointwise vector function."""
    pts = _midpoint_samples(mesh, refine, None)
    vals = np.asarray(f(pts), dtype=float)
    comps = [_block_mean(vals[i], mesh, refine) for i in range(mesh.dim)]
    return VectorField(mesh, np.stack(comps))


def project_dual_component(
    mesh: MeshTopology, g, axis: int, refine: int = DEFAULT_REFINE
) -> FaceField:
    """Mean of a scalar function over every dual cell of ``axis``.

    A dual cell is the primary cell shifted by half a spacing along its
    axis, so the same midpoint rule applies to shifted sample points.
    """
    shift = np.zeros(mesh.dim)
    shift[axis] = 0.5 * mesh.h_axis[axis]
    pts = _midpoint_samples(mesh, refine, shift)
    vals = np.asarray(g(pts), dtype=float)
    return FaceField(mesh, axis, _block_mean(vals, mesh, refine))


def project_dual(mesh: MeshTopology, f, refine: int = DEFAULT_REFINE) -> list[FaceField]:
    """Project a pointwise vector function onto the dual grids.

    Component ``i`` is averaged over the dual cells of axis ``i``; returns
    one FaceField per axis.
    """
    out = []
    for axis in range(mesh.dim):
        out.append(
            project_dual_component(
                mesh, lambda pts, a=axis: np.asarray(f(pts))[a], axis, refine
            )
        )
    return out


# discrete integrals ------------------------------------------------------


def integrate_cells(mesh: MeshTopology, values: np.ndarray) -> float:
    """Integral over the torus of cell data: |K| * sum."""
    return mesh.cell_volume * float(values.sum())


def integrate_faces(mesh: MeshTopology, axis: int, values: np.ndarray) -> float:
    """Integral over the torus of axis-``axis`` dual-cell data: |D| * sum."""
    # |D_sigma| = |K| on a uniform periodic grid
    return mesh.cell_volume * float(values.sum())


def lp_norm(mesh: MeshTopology, values: np.ndarray, p: float) -> float:
    """L^p norm of cell data under the cellwise quadrature."""
    if np.isinf(p):
        return float(np.abs(values).max())
    return float((mesh.cell_volume * (np.abs(values) ** p).sum()) ** (1.0 / p))


# snapshot CSV format -----------------------------------------------------

_INDEX_NAMES = ("i", "j", "k")
_COORD_NAMES = ("x", "y", "z")


def snapshot_header(dim: int) -> list[str]:
    cols = list(_INDEX_NAMES[:dim]) + list(_COORD_NAMES[:dim]) + ["rho"]
    cols += [f"u{a + 1}" for a in range(dim)]
    return cols


def write_snapshot(path, rho: ScalarField, u: VectorField) -> None:
    """One row per cell in lexicographic order, floats in round-trip precision."""
    mesh = rho.mesh
    centers = mesh.cell_centers().reshape(mesh.dim, -1)
    rho_flat = rho.data.ravel()
    u_flat = u.data.reshape(mesh.dim, -1)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(snapshot_header(mesh.dim)) + "\n")
        for flat, cell in enumerate(mesh.cells()):
            row = [str(c) for c in cell]
            row += [repr(float(centers[a, flat])) for a in range(mesh.dim)]
            row.append(repr(float(rho_flat[flat])))
            row += [repr(float(u_flat[a, flat])) for a in range(mesh.dim)]
            fh.write(",".join(row) + "\n")


def read_snapshot(path, mesh: MeshTopology) -> tuple[ScalarField, VectorField]:
    """Inverse of :func:`write_snapshot` for a known mesh."""
    rho = np.empty(mesh.shape)
    u = np.empty((mesh.dim,) + mesh.shape)
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip().split(",")
        if header != snapshot_header(mesh.dim):
            raise ValueError(f"unexpected snapshot header {header}")
        for line in fh:
            parts = line.strip().split(",")
            cell = tuple(int(p) for p in parts[: mesh.dim])
            rho[cell] = float(parts[2 * mesh.dim])
            for a in range(mesh.dim):
                u[(a,) + cell] = float(parts[2 * mesh.dim + 1 + a])
    return ScalarField(mesh, rho), VectorField(mesh, u)
