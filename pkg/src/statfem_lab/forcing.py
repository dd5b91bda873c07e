"""Gaussian-process forcing with a squared-exponential kernel."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist

from .fem import ScalarField, eval_field


@dataclass(frozen=True)
class ForcingModel:
    sigma_f: float = 0.1
    l_f: float = 0.4
    mean: ScalarField = 1.0

    def __post_init__(self):
        if not self.sigma_f > 0 or not self.l_f > 0:
            raise ValueError("sigma_f and l_f must be positive")

    def mean_at(self, pts: np.ndarray) -> np.ndarray:
        return eval_field(self.mean, _pts(pts))


def _pts(x) -> np.ndarray:
    a = np.asarray(x, dtype=float)
    if a.ndim == 0:
        return a.reshape(1, 1)
    if a.ndim == 1:
        return a[:, None]
    return a


def kernel_eval(model: ForcingModel, x, y) -> float:
    d2 = np.sum((np.atleast_1d(np.asarray(x, float)) - np.atleast_1d(np.asarray(y, float))) ** 2)
    return float(model.sigma_f**2 * np.exp(-d2 / (2 * model.l_f**2)))


def kernel_matrix(model: ForcingModel, pts_a, pts_b) -> np.ndarray:
    """``C[a, b] = k_f(pts_a[a], pts_b[b])``. 1D inputs may be flat arrays."""
    d2 = cdist(_pts(pts_a), _pts(pts_b), "sqeuclidean")
    return model.sigma_f**2 * np.exp(-d2 / (2 * model.l_f**2))
