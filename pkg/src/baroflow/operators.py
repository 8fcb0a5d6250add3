"""Discrete differential operators on the periodic grid.

All operators act on plain arrays shaped like the mesh; the wrappers taking
field objects are thin.  Conventions (owner cell ``j``, neighbor ``j + e_i``):

* ``div_h``:      (1/|K|) sum over faces of |sigma| (face average) . outward n,
                  which reduces to the sum over axes of central differences of
                  the face averages divided by h_i (|sigma|/|K| = 1/h_i).
* ``grad_edge``:  per axis-``i`` face, (neighbor - owner)/h_i; lives on the dual grid.
* ``grad_dual``:  per cell, (right face - left face)/h_i of an axis-``i`` face field.
* ``laplace_h``:  (1/|K|) sum over faces of |sigma| (outward jump)/h_i, i.e. the
                  usual (2d+1)-point periodic stencil; identical to composing
                  grad_dual with grad_edge axis by axis.

Exact identities (summation by parts, the divergence rewrite, the Laplacian
composition) hold at machine precision and are enforced by the test suite.
"""

from __future__ import annotations

import numpy as np
from scipy import sparse

from .fields import FaceField, ScalarField, VectorField, face_average, face_jump
from .grid import MeshTopology


def div_h(u: VectorField) -> ScalarField:
    """Discrete divergence of a cell vector field."""
    mesh = u.mesh
    out = np.zeros(mesh.shape)
    for axis in range(mesh.dim):
        avg = face_average(u.data[axis], axis)
        out += (avg - np.roll(avg, 1, axis=axis)) / mesh.h_axis[axis]
    return ScalarField(mesh, out)


def grad_edge(r: ScalarField) -> list[FaceField]:
    """Edge gradient: one difference quotient per face, per axis."""
    mesh = r.mesh
    return [
        FaceField(mesh, axis, face_jump(r.data, axis) / mesh.h_axis[axis])
        for axis in range(mesh.dim)
    ]


def grad_dual(q: list[FaceField]) -> list[ScalarField]:
    """Cell-centered difference of face data, one component per axis."""
    out = []
    for axis, qi in enumerate(q):
        mesh = qi.mesh
        if qi.axis != axis:
            raise ValueError(f"component {axis} lives on axis {qi.axis} faces")
        d = (qi.data - np.roll(qi.data, 1, axis=axis)) / mesh.h_axis[axis]
        out.append(ScalarField(mesh, d))
    return out


def laplace_h(r: ScalarField) -> ScalarField:
    """Discrete Laplacian (sum of the per-axis second differences)."""
    mesh = r.mesh
    out = np.zeros(mesh.shape)
    for axis in range(mesh.dim):
        hi = mesh.h_axis[axis]
        jump_fwd = face_jump(r.data, axis)            # outward jump, right face
        jump_bwd = np.roll(r.data, 1, axis=axis) - r.data  # outward jump, left face
        out += (jump_fwd + jump_bwd) / hi**2
    return ScalarField(mesh, out)


def grad_edge_vector(u: VectorField) -> np.ndarray:
    """Edge gradient of every component: shape (dim, dim, *shape).

    Entry [i, j] holds the axis-``i`` difference quotients of component ``j``
    on the axis-``i`` faces.
    """
    mesh = u.mesh
    out = np.empty((mesh.dim, mesh.dim) + mesh.shape)
    for axis in range(mesh.dim):
        out[axis] = face_jump(u.data, axis + 1) / mesh.h_axis[axis]
    return out


class OperatorWorkspace:
    """Per-mesh cache of index maps and sparse operator matrices.

    Everything here is geometry, built once and reused across time steps;
    the buffers carry no state between calls.
    """

    def __init__(self, mesh: MeshTopology):
        self.mesh = mesh
        n = mesh.cell_count
        self.owner = np.arange(n)
        # flat index of cell j + e_axis for every cell j
        self.neighbor = [
            mesh.neighbor_index(axis, 1).ravel() for axis in range(mesh.dim)
        ]
        self._shift = {}
        self._laplacian = None
        self._central = {}

    def shift_matrix(self, axis: int) -> sparse.csr_matrix:
        """Permutation S with (S x)_j = x_{j + e_axis}."""
        if axis not in self._shift:
            n = self.mesh.cell_count
            self._shift[axis] = sparse.csr_matrix(
                (np.ones(n), (self.owner, self.neighbor[axis])), shape=(n, n)
            )
        return self._shift[axis]

    def laplacian_matrix(self) -> sparse.csr_matrix:
        """Matrix form of :func:`laplace_h` on flattened cell data."""
        if self._laplacian is None:
            n = self.mesh.cell_count
            acc = sparse.csr_matrix((n, n))
            for axis in range(self.mesh.dim):
                s = self.shift_matrix(axis)
                acc = acc + (s + s.T - 2.0 * sparse.identity(n)) / self.mesh.h_axis[axis] ** 2
            self._laplacian = acc.tocsr()
        return self._laplacian

    def central_diff_matrix(self, axis: int) -> sparse.csr_matrix:
        """(x_{j+e} - x_{j-e}) / (2 h_axis); equals div_h restricted to one axis
        and also the cell-difference of face-averaged data."""
        if axis not in self._central:
            s = self.shift_matrix(axis)
            self._central[axis] = ((s - s.T) / (2.0 * self.mesh.h_axis[axis])).tocsr()
        return self._central[axis]
