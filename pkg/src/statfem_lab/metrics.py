"""Wasserstein-2 distances between Gaussian fields, univariate Gaussians and samples."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import IncompatibleFieldsError
from .fields import GaussianField

CLAMP_TOL = 1e-12


@dataclass(frozen=True)
class PsdSqrtResult:
    sqrt: np.ndarray
    clamped_mass: float
    eigenvalues: np.ndarray  # after clamping


def sym_psd_sqrt(C: np.ndarray, tol: float = CLAMP_TOL) -> PsdSqrtResult:
    """Symmetric square root of a PSD matrix by clamped eigendecomposition.

    Eigenvalues below ``tol * lambda_max`` are set to zero; ``clamped_mass``
    reports the total negative eigenvalue mass that was discarded.
    """
    C = np.asarray(C, dtype=float)
    scale = np.max(np.abs(C)) if C.size else 0.0
    if C.ndim != 2 or C.shape[0] != C.shape[1]:
        raise ValueError("matrix must be square")
    if np.max(np.abs(C - C.T), initial=0.0) > 1e-10 * scale:
        raise ValueError("matrix is not symmetric")
    lam, V = scipy.linalg.eigh(0.5 * (C + C.T), check_finite=False)
    clamped_mass = float(-np.sum(lam[lam < 0]))
    lam_max = lam[-1] if lam.size else 0.0
    lam = np.where(lam < tol * max(lam_max, 0.0), 0.0, lam)
    if lam_max <= 0:
        lam = np.zeros_like(lam)
    S = (V * np.sqrt(lam)) @ V.T
    return PsdSqrtResult(0.5 * (S + S.T), clamped_mass, lam)


def _check_compatible(g1: GaussianField, g2: GaussianField):
    if g1.grid.shape != g2.grid.shape or not np.allclose(g1.grid, g2.grid, rtol=0, atol=1e-12):
        raise IncompatibleFieldsError("fields live on different grids")
    if not np.allclose(g1.quad_weights, g2.quad_weights, rtol=1e-12, atol=0):
        raise IncompatibleFieldsError("fields use different quadrature weights")


def bures_squared(S1: np.ndarray, S2: np.ndarray) -> float:
    """``tr S1^2 + tr S2^2 - 2 tr (S1 S2^2 S1)^1/2`` from symmetric roots.

    The cross term is the nuclear norm of ``S1 S2``, whose singular values
    are the square roots of the eigenvalues of ``S1 S2^2 S1``.
    """
    cross = scipy.linalg.svdvals(S1 @ S2, check_finite=False).sum()
    return float(np.sum(S1 * S1) + np.sum(S2 * S2) - 2.0 * cross)


def wasserstein2_gaussian_fields(g1: GaussianField, g2: GaussianField) -> float:
    """W2 between two grid fields in the quadrature-weighted L2 geometry."""
    _check_compatible(g1, g2)
    dm = np.sqrt(g1.quad_weights) * (g1.mean - g2.mean)
    w2 = float(dm @ dm) + bures_squared(g1.weighted_sqrt.sqrt, g2.weighted_sqrt.sqrt)
    return float(np.sqrt(max(w2, 0.0)))


def wasserstein2_univariate_gaussian(a, b) -> float:
    """W2 between ``N(a[0], a[1])`` and ``N(b[0], b[1])`` (second entry is variance)."""
    (ma, va), (mb, vb) = a, b
    if va < 0 or vb < 0:
        raise ValueError("variances must be nonnegative")
    return float(np.hypot(ma - mb, np.sqrt(va) - np.sqrt(vb)))


def wasserstein2_empirical_1d(xs, ys) -> float:
    """Exact W2 between two equal-size empirical measures on the line."""
    xs = np.sort(np.asarray(xs, dtype=float).ravel())
    ys = np.sort(np.asarray(ys, dtype=float).ravel())
    if xs.size != ys.size or xs.size == 0:
        raise ValueError("samples must be nonempty and of equal size")
    return float(np.sqrt(np.mean((xs - ys) ** 2)))
