"""Grid-restricted Gaussian fields and reference grids."""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Optional, Protocol

import numpy as np


class CovarianceSource(Protocol):
    """Anything that can evaluate a Gaussian process at arbitrary points."""

    def mean_at(self, pts: np.ndarray) -> np.ndarray: ...

    def cov_between(self, pts_a: np.ndarray, pts_b: np.ndarray) -> np.ndarray: ...


@dataclass(frozen=True, eq=False)
class GaussianField:
    """Mean and covariance of a Gaussian measure on a reference grid.

    ``quad_weights`` define the discrete L2 inner product used by the
    Wasserstein metric. ``source``, when present, evaluates the same
    process off the grid (needed to condition on off-grid sensors).
    """

    grid: np.ndarray
    quad_weights: np.ndarray
    mean: np.ndarray
    cov: np.ndarray
    source: Optional[CovarianceSource] = None

    def __post_init__(self):
        n = len(self.grid)
        if self.mean.shape != (n,) or self.cov.shape != (n, n) or self.quad_weights.shape != (n,):
            raise ValueError("grid, weights, mean and cov shapes disagree")

    @property
    def dim(self) -> int:
        return self.grid.shape[1]

    @property
    def variance(self) -> np.ndarray:
        return np.diag(self.cov).copy()

    @cached_property
    def weighted_sqrt(self):
        """PSD square root of ``W^1/2 cov W^1/2``; cached since metrics reuse it."""
        from .metrics import sym_psd_sqrt

        sw = np.sqrt(self.quad_weights)
        return sym_psd_sqrt(sw[:, None] * self.cov * sw[None, :])

    def centered(self) -> "GaussianField":
        return GaussianField(self.grid, self.quad_weights, np.zeros_like(self.mean), self.cov)


def trapezoid_weights_1d(n: int) -> np.ndarray:
    w = np.full(n, 1.0 / (n - 1))
    w[[0, -1]] *= 0.5
    return w


def reference_grid(dim: int, n_per_axis: int) -> tuple[np.ndarray, np.ndarray]:
    """Equispaced grid on the closed unit domain with trapezoidal weights.

    In 2D the grid is the tensor product, ordered with x varying fastest.
    """
    if n_per_axis < 2:
        raise ValueError("reference grid needs at least 2 points per axis")
    t = np.linspace(0.0, 1.0, n_per_axis)
    w = trapezoid_weights_1d(n_per_axis)
    if dim == 1:
        return t[:, None], w
    if dim == 2:
        X, Y = np.meshgrid(t, t, indexing="xy")
        pts = np.column_stack([X.ravel(), Y.ravel()])
        return pts, np.outer(w, w).ravel()
    raise ValueError(f"dim must be 1 or 2, got {dim!r}")


def as_points(x, dim: Optional[int] = None) -> np.ndarray:
    a = np.asarray(x, dtype=float)
    if a.ndim == 0:
        a = a.reshape(1, 1)
    elif a.ndim == 1:
        a = a[:, None] if dim in (None, 1) else a[None, :]
    if dim is not None and a.shape[1] != dim:
        raise ValueError(f"expected points of dimension {dim}, got shape {a.shape}")
    return a
