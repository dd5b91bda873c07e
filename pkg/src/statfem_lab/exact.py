"""Exact prior of the 1D Poisson problem through its Green's function."""

from __future__ import annotations

import numpy as np

from .errors import QuadratureError
from .fields import GaussianField, as_points
from .forcing import ForcingModel, kernel_matrix

_GL4_X, _GL4_W = np.polynomial.legendre.leggauss(4)


def greens_eval(x, y):
    """Green's function of ``-u'' = f`` on [0, 1] with zero boundary values."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if np.any((x < 0) | (x > 1)) or np.any((y < 0) | (y > 1)):
        raise ValueError("Green's function arguments must lie in [0, 1]")
    # the two branches agree on x == y
    return np.where(x <= y, x * (1 - y), (1 - x) * y)


def _composite_gauss(breaks: np.ndarray, level: int):
    """4-point Gauss-Legendre on every panel, each split into 2**level pieces."""
    k = 2**level
    a, b = breaks[:-1], breaks[1:]
    frac = np.linspace(0.0, 1.0, k + 1)
    lo = (a[:, None] + (b - a)[:, None] * frac[None, :-1]).ravel()
    width = np.repeat((b - a) / k, k)
    t = (lo + width / 2)[:, None] + (width / 2)[:, None] * _GL4_X[None, :]
    w = (width / 2)[:, None] * _GL4_W[None, :]
    return t.ravel(), w.ravel()


class ExactPrior1D:
    """Mean ``int G f_bar`` and covariance ``int int G k_f G`` on [0, 1].

    Quadrature panels break at every evaluation point so the Green's
    function is linear on each panel; panels are halved until the result
    changes by less than ``rtol`` relative to its largest entry.
    """

    def __init__(self, model: ForcingModel, rtol: float = 1e-8, max_doublings: int = 12):
        self.model = model
        self.rtol = rtol
        self.max_doublings = max_doublings

    def _refine(self, pts: np.ndarray, evaluate):
        breaks = np.unique(np.concatenate([[0.0, 1.0], pts]))
        prev = None
        for level in range(self.max_doublings + 1):
            t, w = _composite_gauss(breaks, level)
            cur = evaluate(t, w)
            if prev is not None:
                scale = np.max(np.abs(cur))
                if np.max(np.abs(cur - prev)) <= self.rtol * scale or scale == 0.0:
                    return cur
            prev = cur
        raise QuadratureError(
            f"exact prior quadrature did not reach rtol={self.rtol} "
            f"after {self.max_doublings} doublings"
        )

    def mean_at(self, pts) -> np.ndarray:
        x = as_points(pts, 1)[:, 0]
        fbar = self.model.mean
        if not callable(fbar):
            return float(fbar) * 0.5 * x * (1 - x)

        def evaluate(t, w):
            return greens_eval(x[:, None], t[None, :]) @ (w * fbar(t[:, None]))

        return self._refine(x, evaluate)

    def cov_between(self, pts_a, pts_b) -> np.ndarray:
        same = pts_b is pts_a
        a = as_points(pts_a, 1)[:, 0]
        b = a if same else as_points(pts_b, 1)[:, 0]

        def evaluate(t, w):
            K = kernel_matrix(self.model, t, t)
            Ga = greens_eval(a[:, None], t[None, :]) * w[None, :]
            Gb = Ga if same else greens_eval(b[:, None], t[None, :]) * w[None, :]
            return Ga @ K @ Gb.T

        return self._refine(a if same else np.concatenate([a, b]), evaluate)

    def on_grid(self, grid, quad_weights) -> GaussianField:
        pts = as_points(grid, 1)
        cov = self.cov_between(pts, pts)
        cov = 0.5 * (cov + cov.T)
        return GaussianField(pts, np.asarray(quad_weights, float), self.mean_at(pts), cov, source=self)


def exact_prior_on_grid(model: ForcingModel, grid, quad_weights) -> GaussianField:
    return ExactPrior1D(model).on_grid(grid, quad_weights)
