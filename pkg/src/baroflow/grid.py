"""Periodic structured mesh of the unit torus in 1, 2 or 3 dimensions.

Cells are axis-aligned boxes of uniform size per axis; the domain [0,1)^d
wraps around in every direction, so there are no boundary faces.  Faces are
identified by (axis, owner cell): the face owned by cell ``j`` along axis
``i`` separates ``j`` from ``j + e_i`` (indices taken modulo the cell count),
and its canonical normal points from owner to neighbor (+e_i).  Every jump,
average and flux convention elsewhere in the package assumes this
orientation.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

CellIndex = tuple[int, ...]


@dataclass(frozen=True)
class FaceId:
    """A mesh face, identified by its axis and the owner cell.

    The face sits between ``cell`` and ``cell + e_axis`` (periodic wrap);
    its canonical normal points toward the neighbor.
    """

    axis: int
    cell: CellIndex


@dataclass(frozen=True)
class DualCell:
    """Face-centered control volume: half of each of the two adjacent cells."""

    face: FaceId
    halves: tuple[CellIndex, CellIndex]
    measure: float


@dataclass(frozen=True)
class MeshTopology:
    """Uniform periodic grid on the unit torus.

    Immutable after construction; safe to share between any number of
    concurrent readers.
    """

    dim: int
    cells_per_axis: tuple[int, ...]

    def __post_init__(self):
        if self.dim not in (1, 2, 3):
            raise ValueError(f"dim must be 1, 2 or 3, got {self.dim}")
        if len(self.cells_per_axis) != self.dim:
            raise ValueError(
                f"expected {self.dim} axis counts, got {len(self.cells_per_axis)}"
            )
        for n in self.cells_per_axis:
            if int(n) != n or n < 2:
                # with a single cell per axis a face would join a cell to itself
                raise ValueError(f"every axis needs at least 2 cells, got {n}")

    # geometry -----------------------------------------------------------

    @property
    def shape(self) -> tuple[int, ...]:
        return self.cells_per_axis

    @property
    def h_axis(self) -> tuple[float, ...]:
        """Cell extent per axis, h_i = 1/N_i."""
        return tuple(1.0 / n for n in self.cells_per_axis)

    @property
    def h(self) -> float:
        """Mesh size: the largest cell extent over all axes."""
        return max(self.h_axis)

    @property
    def regularity_ratio(self) -> float:
        """max_i h / h_i; equals 1 on isotropic grids."""
        return max(self.h / hi for hi in self.h_axis)

    @property
    def cell_count(self) -> int:
        n = 1
        for m in self.cells_per_axis:
            n *= m
        return n

    @property
    def cell_volume(self) -> float:
        """|K|: identical for every cell."""
        v = 1.0
        for hi in self.h_axis:
            v *= hi
        return v

    def face_area(self, axis: int) -> float:
        """|sigma| for faces orthogonal to ``axis``; |K| = h_i |sigma|."""
        return self.cell_volume / self.h_axis[axis]

    def face_distance(self, axis: int) -> float:
        """Periodic distance between the two cell centers across a face."""
        return self.h_axis[axis]

    @property
    def face_count(self) -> int:
        """Total number of faces: one per (axis, cell) pair."""
        return self.dim * self.cell_count

    # indexing -----------------------------------------------------------

    def wrap(self, cell: CellIndex) -> CellIndex:
        return tuple(c % n for c, n in zip(cell, self.cells_per_axis))

    def cells(self):
        """Lexicographic iteration over all cell multi-indices."""
        return itertools.product(*(range(n) for n in self.cells_per_axis))

    def faces(self, axis: int):
        """All faces orthogonal to ``axis``, in owner-cell lexicographic order."""
        for cell in self.cells():
            yield FaceId(axis, cell)

    def all_faces(self):
        for axis in range(self.dim):
            yield from self.faces(axis)

    def faces_of(self, cell: CellIndex):
        """The 2d faces incident to ``cell`` (right then left along each axis)."""
        cell = self.wrap(cell)
        out = []
        for axis in range(self.dim):
            left = list(cell)
            left[axis] -= 1
            out.append(FaceId(axis, cell))
            out.append(FaceId(axis, self.wrap(tuple(left))))
        return out

    def outward_sign(self, cell: CellIndex, face: FaceId) -> int:
        """+1 if the canonical face normal is outward for ``cell``, else -1."""
        cell = self.wrap(cell)
        if face.cell == cell:
            return 1
        left = list(cell)
        left[face.axis] -= 1
        if face.cell == self.wrap(tuple(left)):
            return -1
        raise ValueError(f"face {face} is not incident to cell {cell}")

    def dual_cell(self, face: FaceId) -> DualCell:
        owner = self.wrap(face.cell)
        nb = list(owner)
        nb[face.axis] += 1
        return DualCell(face, (owner, self.wrap(tuple(nb))), self.cell_volume)

    # coordinates --------------------------------------------------------

    def cell_centers(self) -> np.ndarray:
        """Coordinates of all cell centers, shape (dim, *shape)."""
        axes = [
            (np.arange(n) + 0.5) * hi
            for n, hi in zip(self.cells_per_axis, self.h_axis)
        ]
        return np.stack(np.meshgrid(*axes, indexing="ij"))

    def face_centers(self, axis: int) -> np.ndarray:
        """Coordinates of the centers of the ``axis`` faces, shape (dim, *shape)."""
        coords = self.cell_centers()
        coords[axis] = (coords[axis] + 0.5 * self.h_axis[axis]) % 1.0
        return coords

    def flat_index(self, cell: CellIndex) -> int:
        return int(np.ravel_multi_index(self.wrap(cell), self.cells_per_axis))

    def neighbor_index(self, axis: int, step: int = 1) -> np.ndarray:
        """Flat index of cell ``j + step*e_axis`` for every cell j, shape (*shape,)."""
        idx = np.arange(self.cell_count).reshape(self.cells_per_axis)
        return np.roll(idx, -step, axis=axis)


def build_mesh(dim: int, cells_per_axis) -> MeshTopology:
    """Construct the periodic mesh; rejects dim outside 1..3 and axes with < 2 cells."""
    return MeshTopology(dim, tuple(int(n) for n in cells_per_axis))


def neighbor_across(mesh: MeshTopology, cell: CellIndex, face: FaceId) -> CellIndex:
    """The cell on the other side of ``face`` from ``cell``.

    Involutive: applying it twice across the same face returns the original
    cell.  Raises if the face is not incident to the cell.
    """
    cell = mesh.wrap(cell)
    sign = mesh.outward_sign(cell, face)  # raises if not incident
    nb = list(cell)
    nb[face.axis] += sign
    return mesh.wrap(tuple(nb))
