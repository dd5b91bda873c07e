"""Seeded sampling of grid Gaussian fields and the maximum functional."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .fields import GaussianField
from .metrics import sym_psd_sqrt

RNG_ALGORITHM = "numpy.random.PCG64"


def make_rng(*key: int) -> np.random.Generator:
    """PCG64 stream derived from an integer key, e.g. ``(seed, stream_id)``."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(list(key))))


@dataclass(frozen=True, eq=False)
class SampleBatch:
    trajectories: np.ndarray  # (n_samples, N)
    seed: tuple
    source: str = ""


def sample_field(field: GaussianField, n_samples: int, seed, source: str = "") -> SampleBatch:
    """Draw ``mean + F z`` with ``F`` the clamped symmetric root of ``cov``.

    Near-singular posterior covariances rule out Cholesky, hence the
    eigendecomposition factor.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    key = tuple(seed) if isinstance(seed, (tuple, list)) else (int(seed),)
    F = sym_psd_sqrt(field.cov).sqrt
    z = make_rng(*key).standard_normal((n_samples, len(field.mean)))
    return SampleBatch(field.mean[None, :] + z @ F.T, key, source)


def max_functional(batch: SampleBatch) -> np.ndarray:
    if batch.trajectories.size == 0:
        raise ValueError("empty sample batch")
    return batch.trajectories.max(axis=1)
