"""Uniform simplicial meshes of the unit interval and the unit square."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Mesh:
    """A conforming P1 mesh.

    Attributes
    ----------
    dim : int
        Spatial dimension, 1 or 2.
    nodes : ndarray, shape (n_nodes, dim)
        Node coordinates.
    elements : ndarray of int, shape (n_elements, dim + 1)
        Vertex indices of each cell.
    interior_nodes, boundary_nodes : ndarray of int
        Disjoint index sets covering all nodes. Degrees of freedom are
        numbered in the order of ``interior_nodes``.
    h : float
        Largest element diameter.
    n : int
        Cells per side used to build the mesh.
    """

    dim: int
    nodes: np.ndarray
    elements: np.ndarray
    interior_nodes: np.ndarray
    boundary_nodes: np.ndarray
    h: float
    n: int

    @property
    def n_dofs(self) -> int:
        return len(self.interior_nodes)

    @property
    def dof_of_node(self) -> np.ndarray:
        """Map node index -> dof index, -1 on the boundary."""
        out = np.full(len(self.nodes), -1, dtype=np.int64)
        out[self.interior_nodes] = np.arange(self.n_dofs)
        return out

    def element_measures(self) -> np.ndarray:
        v = self.nodes[self.elements]
        if self.dim == 1:
            return np.abs(v[:, 1, 0] - v[:, 0, 0])
        e1 = v[:, 1] - v[:, 0]
        e2 = v[:, 2] - v[:, 0]
        return 0.5 * np.abs(e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])


def _freeze(*arrays):
    for a in arrays:
        a.setflags(write=False)


def build_interval_mesh(n_cells: int) -> Mesh:
    """Equispaced mesh of [0, 1] with ``n_cells`` cells."""
    if int(n_cells) != n_cells or n_cells < 2:
        raise ValueError(f"n_cells must be an integer >= 2, got {n_cells!r}")
    n_cells = int(n_cells)
    nodes = np.linspace(0.0, 1.0, n_cells + 1)[:, None]
    idx = np.arange(n_cells)
    elements = np.stack([idx, idx + 1], axis=1)
    interior = np.arange(1, n_cells)
    boundary = np.array([0, n_cells])
    _freeze(nodes, elements, interior, boundary)
    return Mesh(1, nodes, elements, interior, boundary, 1.0 / n_cells, n_cells)


def build_unit_square_mesh(n_per_side: int) -> Mesh:
    """Structured triangulation of [0, 1]^2.

    Each of the ``n x n`` grid squares is cut along its lower-left to
    upper-right diagonal, so ``h = sqrt(2) / n``.
    """
    if int(n_per_side) != n_per_side or n_per_side < 2:
        raise ValueError(f"n_per_side must be an integer >= 2, got {n_per_side!r}")
    n = int(n_per_side)
    t = np.linspace(0.0, 1.0, n + 1)
    X, Y = np.meshgrid(t, t, indexing="xy")
    nodes = np.column_stack([X.ravel(), Y.ravel()])

    i, j = np.meshgrid(np.arange(n), np.arange(n), indexing="xy")
    ll = (j * (n + 1) + i).ravel()
    lr = ll + 1
    ul = ll + (n + 1)
    ur = ul + 1
    lower = np.stack([ll, lr, ur], axis=1)
    upper = np.stack([ll, ur, ul], axis=1)
    elements = np.concatenate([lower, upper], axis=0)

    on_bdry = (
        np.isclose(nodes[:, 0], 0.0)
        | np.isclose(nodes[:, 0], 1.0)
        | np.isclose(nodes[:, 1], 0.0)
        | np.isclose(nodes[:, 1], 1.0)
    )
    interior = np.flatnonzero(~on_bdry)
    boundary = np.flatnonzero(on_bdry)
    _freeze(nodes, elements, interior, boundary)
    return Mesh(2, nodes, elements, interior, boundary, np.sqrt(2.0) / n, n)


def build_mesh(dim: int, n: int) -> Mesh:
    if dim == 1:
        return build_interval_mesh(n)
    if dim == 2:
        return build_unit_square_mesh(n)
    raise ValueError(f"dim must be 1 or 2, got {dim!r}")
