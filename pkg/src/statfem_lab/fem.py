"""P1 finite elements: assembly, solves, point evaluation and error norms.

Dirichlet nodes are eliminated, so every operator here lives on the
interior degrees of freedom ``mesh.interior_nodes``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Union

import numpy as np
import scipy.linalg
import scipy.sparse as sp

from .errors import EllipticityError, OutOfDomainError, SingularSystemError
from .mesh import Mesh

ScalarField = Union[float, Callable[[np.ndarray], np.ndarray]]

_GL4_X, _GL4_W = np.polynomial.legendre.leggauss(4)


def _triangle_rule_7():
    # degree-5 symmetric rule on the reference triangle, weights sum to 1
    s15 = np.sqrt(15.0)
    a = (6.0 + s15) / 21.0
    b = (6.0 - s15) / 21.0
    wa = (155.0 + s15) / 1200.0
    wb = (155.0 - s15) / 1200.0
    bary = np.array(
        [
            [1 / 3, 1 / 3, 1 / 3],
            [1 - 2 * a, a, a],
            [a, 1 - 2 * a, a],
            [a, a, 1 - 2 * a],
            [1 - 2 * b, b, b],
            [b, 1 - 2 * b, b],
            [b, b, 1 - 2 * b],
        ]
    )
    w = np.array([9 / 40, wa, wa, wa, wb, wb, wb])
    return bary, w


_TRI7_BARY, _TRI7_W = _triangle_rule_7()


def eval_field(f: ScalarField, pts: np.ndarray) -> np.ndarray:
    """Evaluate a constant or callable field at points of shape (m, dim)."""
    if callable(f):
        return np.broadcast_to(np.asarray(f(pts), dtype=float), (len(pts),))
    return np.full(len(pts), float(f))


def element_quadrature(mesh: Mesh, subdivisions: int = 1):
    """Quadrature points on every element.

    Returns ``(points, weights, bary)`` with points of shape (n_e, q, dim),
    absolute weights of shape (n_e, q) and barycentric coordinates of each
    point with respect to its element, shape (q, dim + 1). In 1D each cell
    may be split into ``subdivisions`` panels of 4-point Gauss-Legendre.
    """
    verts = mesh.nodes[mesh.elements]
    meas = mesh.element_measures()
    if mesh.dim == 1:
        k = int(subdivisions)
        edges = np.linspace(0.0, 1.0, k + 1)
        t = ((edges[:-1, None] + edges[1:, None]) + (edges[1:, None] - edges[:-1, None]) * _GL4_X) / 2
        t = t.ravel()
        wq = np.repeat(np.diff(edges), 4) * np.tile(_GL4_W, k) / 2
        bary = np.column_stack([1 - t, t])
    else:
        if subdivisions != 1:
            raise ValueError("subdivided quadrature is only available in 1D")
        bary, wq = _TRI7_BARY, _TRI7_W
    points = np.einsum("qa,ead->eqd", bary, verts)
    weights = meas[:, None] * wq[None, :]
    return points, weights, bary


def _grad_bary(mesh: Mesh) -> np.ndarray:
    """Constant gradients of the element barycentric functions, (n_e, dim+1, dim)."""
    v = mesh.nodes[mesh.elements]
    if mesh.dim == 1:
        L = v[:, 1, 0] - v[:, 0, 0]
        g = np.stack([-1.0 / L, 1.0 / L], axis=1)
        return g[:, :, None]
    T = np.stack([v[:, 1] - v[:, 0], v[:, 2] - v[:, 0]], axis=2)  # columns are edges
    Tinv = np.linalg.inv(T)  # rows: grad of lambda_1, lambda_2
    g12 = Tinv
    g0 = -g12.sum(axis=1, keepdims=True)
    return np.concatenate([g0, g12], axis=1)


def _scatter(mesh: Mesh, local: np.ndarray) -> sp.csr_matrix:
    """Sum element matrices (n_e, k, k) into a global node matrix."""
    e = mesh.elements
    k = e.shape[1]
    rows = np.repeat(e, k, axis=1).ravel()
    cols = np.tile(e, (1, k)).ravel()
    n = len(mesh.nodes)
    return sp.coo_matrix((local.ravel(), (rows, cols)), shape=(n, n)).tocsr()


def _restrict(mesh: Mesh, full: sp.spmatrix, cols="interior") -> sp.csr_matrix:
    I = mesh.interior_nodes
    out = full[I][:, I] if cols == "interior" else full[I]
    return sp.csr_matrix(out)


def assemble_stiffness(mesh: Mesh, kappa: ScalarField = 1.0) -> sp.csr_matrix:
    """Stiffness matrix on the interior dofs with quadrature-evaluated conductivity."""
    pts, w, _ = element_quadrature(mesh)
    kq = eval_field(kappa, pts.reshape(-1, mesh.dim)).reshape(w.shape)
    if np.any(~(kq > 0)):
        raise EllipticityError("conductivity must be strictly positive on the domain")
    kint = (kq * w).sum(axis=1)  # integral of kappa over each element
    G = _grad_bary(mesh)
    local = kint[:, None, None] * np.einsum("ead,ebd->eab", G, G)
    A = _restrict(mesh, _scatter(mesh, local))
    return ((A + A.T) * 0.5).tocsr()


def _local_mass(mesh: Mesh) -> np.ndarray:
    meas = mesh.element_measures()
    if mesh.dim == 1:
        ref = np.array([[2.0, 1.0], [1.0, 2.0]]) / 6.0
    else:
        ref = (np.ones((3, 3)) + np.eye(3)) / 12.0
    return meas[:, None, None] * ref[None]


def assemble_mass_full(mesh: Mesh) -> sp.csr_matrix:
    """Mass matrix rows for interior dofs against all nodes, (n_u, n_nodes)."""
    return _restrict(mesh, _scatter(mesh, _local_mass(mesh)), cols="all")


def assemble_mass(mesh: Mesh) -> sp.csr_matrix:
    """Exact P1 mass matrix on the interior dofs."""
    return _restrict(mesh, _scatter(mesh, _local_mass(mesh)))


def basis_at_quadrature(mesh: Mesh, subdivisions: int = 1):
    """Quadrature points, weights and a sparse (n_points, n_u) basis-value matrix."""
    pts, w, bary = element_quadrature(mesh, subdivisions)
    n_e, q = w.shape
    dof = mesh.dof_of_node[mesh.elements]  # (n_e, k)
    rows = np.repeat(np.arange(n_e * q).reshape(n_e, q)[:, :, None], dof.shape[1], axis=2)
    cols = np.broadcast_to(dof[:, None, :], rows.shape)
    vals = np.broadcast_to(bary[None, :, :], rows.shape)
    keep = cols >= 0
    Phi = sp.csr_matrix(
        (vals[keep], (rows[keep], cols[keep])), shape=(n_e * q, mesh.n_dofs)
    )
    return pts.reshape(-1, mesh.dim), w.ravel(), Phi


def assemble_load(mesh: Mesh, f: ScalarField) -> np.ndarray:
    """Load vector ``int f phi_i`` by per-element Gauss quadrature."""
    pts, w, Phi = basis_at_quadrature(mesh)
    return Phi.T @ (w * eval_field(f, pts))


@dataclass(frozen=True)
class FemSystem:
    mesh: Mesh
    stiffness: sp.csr_matrix
    mass: sp.csr_matrix
    conductivity: ScalarField = 1.0

    @cached_property
    def _banded_factor(self):
        A = self.stiffness.tocoo()
        bw = int(np.max(np.abs(A.row - A.col))) if A.nnz else 0
        n = A.shape[0]
        ab = np.zeros((bw + 1, n))
        upper = A.col >= A.row
        ab[bw + A.row[upper] - A.col[upper], A.col[upper]] = A.data[upper]
        try:
            return scipy.linalg.cholesky_banded(ab, lower=False, check_finite=False)
        except np.linalg.LinAlgError as exc:
            raise SingularSystemError(f"stiffness matrix is not SPD: {exc}") from exc

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        """Solve ``A u = rhs`` for one or many right-hand sides (columns)."""
        rhs = np.asarray(rhs, dtype=float)
        if rhs.shape[0] != self.mesh.n_dofs:
            raise ValueError(f"rhs has {rhs.shape[0]} rows, expected {self.mesh.n_dofs}")
        return scipy.linalg.cho_solve_banded((self._banded_factor, False), rhs, check_finite=False)


def assemble_system(mesh: Mesh, kappa: ScalarField = 1.0) -> FemSystem:
    return FemSystem(mesh, assemble_stiffness(mesh, kappa), assemble_mass(mesh), kappa)


def solve_fem(system: FemSystem, load: np.ndarray) -> np.ndarray:
    u = system.solve(load)
    resid = np.linalg.norm(system.stiffness @ u - load)
    if resid > 1e-10 * max(np.linalg.norm(load), np.finfo(float).tiny):
        raise SingularSystemError(f"residual {resid:.3e} exceeds tolerance")
    return u


@dataclass(frozen=True)
class InterpolationMatrix:
    """Sparse ``P[k, i] = phi_i(points[k])``."""

    matrix: sp.csr_matrix
    points: np.ndarray


def _as_points(points, dim: int) -> np.ndarray:
    pts = np.asarray(points, dtype=float)
    if dim == 1 and pts.ndim <= 1:
        pts = pts.reshape(-1, 1)
    if pts.ndim != 2 or pts.shape[1] != dim:
        raise ValueError(f"points must have shape (m, {dim})")
    return pts


def basis_eval_matrix(mesh: Mesh, points) -> InterpolationMatrix:
    """Locate ``points`` in the structured mesh and evaluate the hat functions there."""
    pts = _as_points(points, mesh.dim)
    tol = 1e-12
    if np.any(pts < -tol) or np.any(pts > 1 + tol):
        raise OutOfDomainError("points must lie in the closed unit domain")
    pts = np.clip(pts, 0.0, 1.0)
    n = mesh.n
    m = len(pts)
    if mesh.dim == 1:
        x = pts[:, 0]
        i = np.minimum(np.floor(x * n).astype(np.int64), n - 1)
        s = x * n - i
        nodes = np.stack([i, i + 1], axis=1)
        vals = np.stack([1 - s, s], axis=1)
    else:
        gx = pts * n
        ij = np.minimum(np.floor(gx).astype(np.int64), n - 1)
        s = gx[:, 0] - ij[:, 0]
        t = gx[:, 1] - ij[:, 1]
        ll = ij[:, 1] * (n + 1) + ij[:, 0]
        lr, ul = ll + 1, ll + n + 1
        ur = ul + 1
        lower = s >= t
        nodes = np.where(
            lower[:, None],
            np.stack([ll, lr, ur], axis=1),
            np.stack([ll, ur, ul], axis=1),
        )
        vals = np.where(
            lower[:, None],
            np.stack([1 - s, s - t, t], axis=1),
            np.stack([1 - t, s, t - s], axis=1),
        )
    dof = mesh.dof_of_node[nodes]
    rows = np.repeat(np.arange(m)[:, None], nodes.shape[1], axis=1)
    keep = (dof >= 0) & (vals != 0)
    P = sp.csr_matrix((vals[keep], (rows[keep], dof[keep])), shape=(m, mesh.n_dofs))
    return InterpolationMatrix(P, pts)


def error_norms(mesh: Mesh, dofs, u_exact, grad_exact) -> tuple[float, float]:
    """Quadrature approximations of ``||u - u_h||_L2`` and ``|u - u_h|_H1``."""
    pts, w, bary = element_quadrature(mesh)
    full = np.zeros(len(mesh.nodes))
    full[mesh.interior_nodes] = dofs
    ue = full[mesh.elements]  # (n_e, k)
    uh = ue @ bary.T  # (n_e, q)
    duh = np.einsum("ea,ead->ed", ue, _grad_bary(mesh))
    flat = pts.reshape(-1, mesh.dim)
    u = np.asarray(u_exact(flat), dtype=float).reshape(w.shape)
    du = np.asarray(grad_exact(flat), dtype=float).reshape(w.shape + (mesh.dim,))
    l2 = np.sqrt(np.sum(w * (u - uh) ** 2))
    h1 = np.sqrt(np.sum(w * np.sum((du - duh[:, None, :]) ** 2, axis=2)))
    return float(l2), float(h1)
