"""Pointwise sensors, synthetic data and Gaussian conditioning."""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional, Union

import numpy as np
import scipy.linalg

from .errors import ConditioningError, LocationError, StatfemError
from .fields import CovarianceSource, GaussianField, as_points
from .metrics import sym_psd_sqrt
from .sampling import make_rng


@dataclass(frozen=True, eq=False)
class SensorSet:
    locations: np.ndarray
    epsilon: float
    values: Optional[np.ndarray] = None

    def __post_init__(self):
        loc = np.asarray(self.locations, dtype=float)
        if loc.ndim == 1:
            loc = loc[:, None]
        object.__setattr__(self, "locations", loc)
        if len(loc) < 1:
            raise ValueError("need at least one sensor")
        if not self.epsilon > 0:
            raise ValueError("sensor noise epsilon must be strictly positive")
        if len(np.unique(np.round(loc, 12), axis=0)) != len(loc):
            raise ValueError("sensor locations must be distinct")
        if self.values is not None:
            v = np.asarray(self.values, dtype=float)
            if v.shape != (len(loc),):
                raise ValueError(f"expected {len(loc)} sensor values, got shape {v.shape}")
            object.__setattr__(self, "values", v)

    @property
    def size(self) -> int:
        return len(self.locations)

    def with_values(self, values) -> "SensorSet":
        return replace(self, values=np.asarray(values, dtype=float))

    def subset(self, idx) -> "SensorSet":
        vals = None if self.values is None else self.values[idx]
        return SensorSet(self.locations[idx], self.epsilon, vals)


def equispaced_sensors(dim: int, per_axis: int, epsilon: float, lo=0.01, hi=0.99) -> SensorSet:
    t = np.linspace(lo, hi, per_axis)
    if dim == 1:
        return SensorSet(t[:, None], epsilon)
    X, Y = np.meshgrid(t, t, indexing="xy")
    return SensorSet(np.column_stack([X.ravel(), Y.ravel()]), epsilon)


def _source_of(prior: Union[GaussianField, CovarianceSource]) -> CovarianceSource:
    if isinstance(prior, GaussianField):
        if prior.source is None:
            raise LocationError("field has no off-grid evaluator")
        return prior.source
    return prior


def generate_sensor_data(prior, sensors: SensorSet, seed: int) -> np.ndarray:
    """One noisy observation ``v = u(y) + eps * xi`` with ``u`` drawn from ``prior``."""
    src = _source_of(prior)
    y = sensors.locations
    m = np.asarray(src.mean_at(y), dtype=float)
    C = np.asarray(src.cov_between(y, y), dtype=float)
    C = 0.5 * (C + C.T)
    res = sym_psd_sqrt(C)
    if res.clamped_mass > 1e-8 * max(np.trace(C), np.finfo(float).tiny):
        raise StatfemError("sensor covariance is not positive semidefinite")
    rng = make_rng(seed)
    z = rng.standard_normal(sensors.size)
    xi = rng.standard_normal(sensors.size)
    return m + res.sqrt @ z + sensors.epsilon * xi


class PosteriorSource:
    """Off-grid evaluator of a prior conditioned on sensor data."""

    def __init__(self, prior: CovarianceSource, sensors: SensorSet):
        self.prior = prior
        self.sensors = sensors
        y = sensors.locations
        Cyy = np.asarray(prior.cov_between(y, y))
        self._chol = _factor_innovation(Cyy, sensors.epsilon)
        innov = sensors.values - prior.mean_at(y)
        self._alpha = scipy.linalg.cho_solve(self._chol, innov, check_finite=False)

    def mean_at(self, pts) -> np.ndarray:
        k = self.prior.cov_between(pts, self.sensors.locations)
        return self.prior.mean_at(pts) + k @ self._alpha

    def cov_between(self, pts_a, pts_b) -> np.ndarray:
        y = self.sensors.locations
        ka = self.prior.cov_between(pts_a, y)
        kb = ka if pts_b is pts_a else self.prior.cov_between(pts_b, y)
        return self.prior.cov_between(pts_a, pts_b) - ka @ scipy.linalg.cho_solve(
            self._chol, kb.T, check_finite=False
        )


def _factor_innovation(Cyy: np.ndarray, epsilon: float):
    B = 0.5 * (Cyy + Cyy.T) + epsilon**2 * np.eye(len(Cyy))
    try:
        return scipy.linalg.cho_factor(B, lower=True, check_finite=False)
    except np.linalg.LinAlgError as exc:
        raise ConditioningError(f"innovation covariance is not SPD: {exc}") from exc


def _grid_indices(grid: np.ndarray, y: np.ndarray) -> Optional[np.ndarray]:
    d = np.linalg.norm(grid[None, :, :] - y[:, None, :], axis=2)
    idx = np.argmin(d, axis=1)
    if np.all(d[np.arange(len(y)), idx] <= 1e-12):
        return idx
    return None


def condition(prior: GaussianField, sensors: SensorSet) -> GaussianField:
    """Condition a grid field on noisy point observations.

    Cross covariances come from the field's source when it has one, else
    every sensor must coincide with a grid point.
    """
    if sensors.values is None:
        raise ValueError("sensor set carries no observation values")
    y = as_points(sensors.locations, prior.dim)
    if prior.source is not None:
        src = prior.source
        Kgy = np.asarray(src.cov_between(prior.grid, y))
        Kyy = np.asarray(src.cov_between(y, y))
        my = np.asarray(src.mean_at(y))
    else:
        idx = _grid_indices(prior.grid, y)
        if idx is None:
            raise LocationError("sensors are off-grid and the field has no evaluator")
        Kgy = prior.cov[:, idx]
        Kyy = prior.cov[np.ix_(idx, idx)]
        my = prior.mean[idx]

    L, lower = _factor_innovation(Kyy, sensors.epsilon)
    innov = sensors.values - my
    Wt = scipy.linalg.solve_triangular(L, Kgy.T, lower=True, check_finite=False)
    a = scipy.linalg.solve_triangular(L, innov, lower=True, check_finite=False)
    mean = prior.mean + Wt.T @ a
    cov = prior.cov - Wt.T @ Wt
    cov = 0.5 * (cov + cov.T)
    source = PosteriorSource(prior.source, sensors) if prior.source is not None else None
    return GaussianField(prior.grid, prior.quad_weights, mean, cov, source=source)


@dataclass(frozen=True)
class UnivariateGaussian:
    mean: float
    variance: float


def pushforward_linear_functional(field: GaussianField, weights) -> UnivariateGaussian:
    """Law of ``sum_k weights_k u(x_k)`` under the field."""
    w = np.asarray(weights, dtype=float)
    return UnivariateGaussian(float(w @ field.mean), float(max(w @ field.cov @ w, 0.0)))
