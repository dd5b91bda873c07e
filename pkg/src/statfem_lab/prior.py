"""The StatFEM prior: a Gaussian process pushed through the FE solution map."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal, Optional

import numpy as np

from .fem import (
    FemSystem,
    assemble_load,
    assemble_mass_full,
    basis_at_quadrature,
    basis_eval_matrix,
)
from .fields import GaussianField, as_points
from .forcing import ForcingModel, kernel_matrix

KfMode = Literal["exact-quadrature", "nodal-mass"]


@dataclass(frozen=True)
class ForcingCovarianceMatrix:
    """Covariance of the random load vector, ``F K F^*`` on the interior dofs."""

    matrix: np.ndarray
    assembly_mode: str


def default_kf_mode(dim: int) -> KfMode:
    return "exact-quadrature" if dim == 1 else "nodal-mass"


def _panels_per_element(h: float, l_f: float) -> int:
    # keep Gauss panels at most l_f / 2 wide so narrow kernels are resolved
    return max(1, int(np.ceil(2.0 * h / l_f)))


def assemble_forcing_covariance(
    fem: FemSystem, model: ForcingModel, mode: Optional[KfMode] = None
) -> ForcingCovarianceMatrix:
    """Assemble ``(K_F)_ij = int int phi_i(x) k_f(x, y) phi_j(y) dx dy``.

    ``exact-quadrature`` applies the element quadrature in both variables.
    ``nodal-mass`` interpolates the kernel at the mesh nodes (boundary nodes
    included), giving ``M_full C M_full^T``.
    """
    mesh = fem.mesh
    mode = mode or default_kf_mode(mesh.dim)
    if mode == "exact-quadrature":
        sub = _panels_per_element(mesh.h, model.l_f) if mesh.dim == 1 else 1
        pts, w, Phi = basis_at_quadrature(mesh, sub)
        WPhi = (Phi.T.multiply(w[None, :])).tocsr()  # (n_u, Q)
        Kq = kernel_matrix(model, pts, pts)
        KF = WPhi @ (WPhi @ Kq).T
    elif mode == "nodal-mass":
        Mf = assemble_mass_full(mesh)
        C = kernel_matrix(model, mesh.nodes, mesh.nodes)
        KF = Mf @ (Mf @ C).T
    else:
        raise ValueError(f"unknown K_F assembly mode {mode!r}")
    KF = np.asarray(KF)
    return ForcingCovarianceMatrix(0.5 * (KF + KF.T), mode)


class StatfemPrior:
    """Mean and covariance of ``Phi(x)^T A^-1 f`` for a Gaussian load ``f``."""

    def __init__(self, fem: FemSystem, kf: ForcingCovarianceMatrix, model: ForcingModel):
        self.fem = fem
        self.kf = kf
        self.model = model
        self.mean_dofs = fem.solve(assemble_load(fem.mesh, model.mean))

    @property
    def mesh(self):
        return self.fem.mesh

    def solution_map(self, pts: np.ndarray) -> np.ndarray:
        """Dense ``P A^-1`` for the given points, shape (m, n_u)."""
        P = basis_eval_matrix(self.mesh, pts).matrix
        m, n_u = P.shape
        if m <= n_u:
            return self.fem.solve(P.T.toarray()).T
        # fewer solves to form A^-1 itself
        Ainv = self.fem.solve(np.eye(n_u))
        return np.asarray(P @ Ainv)

    def mean_at(self, pts) -> np.ndarray:
        P = basis_eval_matrix(self.mesh, as_points(pts, self.mesh.dim)).matrix
        return P @ self.mean_dofs

    def cov_between(self, pts_a, pts_b) -> np.ndarray:
        Ba = self.solution_map(as_points(pts_a, self.mesh.dim))
        Bb = Ba if pts_b is pts_a else self.solution_map(as_points(pts_b, self.mesh.dim))
        return Ba @ self.kf.matrix @ Bb.T

    def on_grid(self, grid: np.ndarray, quad_weights: np.ndarray) -> GaussianField:
        B = self.solution_map(grid)
        cov = B @ self.kf.matrix @ B.T
        cov = 0.5 * (cov + cov.T)
        mean = B @ assemble_load(self.mesh, self.model.mean)
        return GaussianField(grid, quad_weights, mean, cov, source=self)


def statfem_prior_on_grid(
    fem: FemSystem,
    kf: ForcingCovarianceMatrix,
    model: ForcingModel,
    grid: np.ndarray,
    quad_weights: np.ndarray,
) -> GaussianField:
    return StatfemPrior(fem, kf, model).on_grid(as_points(grid, fem.mesh.dim), quad_weights)
