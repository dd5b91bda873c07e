import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from statfem_lab.fields import GaussianField, reference_grid
from statfem_lab.rates import dyadic_log_ratio, fit_loglog_slope, smooth_lr
from statfem_lab.sampling import SampleBatch, max_functional, sample_field

from conftest import random_psd


def _field(mean, cov):
    n = len(mean)
    return GaussianField(np.linspace(0, 1, n)[:, None], np.ones(n), np.asarray(mean, float), np.asarray(cov, float))


# -- sampling ----------------------------------------------------------------------


def test_zero_covariance_samples_equal_mean():
    m = np.linspace(-1, 1, 7)
    b = sample_field(_field(m, np.zeros((7, 7))), 20, 1)
    assert np.all(b.trajectories == m)


def test_scalar_sample_variance():
    b = sample_field(_field([0.0], [[1.0]]), 100_000, 7)
    assert abs(b.trajectories.var() - 1.0) < 0.02


def test_seeded_batches_identical(rng):
    f = _field(np.zeros(5), random_psd(rng, 5))
    a, b = sample_field(f, 10, (3, 1)), sample_field(f, 10, (3, 1))
    np.testing.assert_array_equal(a.trajectories, b.trajectories)
    c = sample_field(f, 10, (3, 2))
    assert not np.array_equal(a.trajectories, c.trajectories)


def test_sample_mean_and_covariance(rng):
    C = random_psd(rng, 6, rank=3)  # singular, as posterior covariances are
    m = rng.normal(size=6)
    t = sample_field(_field(m, C), 10_000, 11).trajectories
    tol = 5 * np.sqrt(np.diag(C) / 10_000).max()
    if np.max(np.abs(t.mean(0) - m)) > tol:
        warnings.warn("sample mean outside the 5-sigma band", stacklevel=1)
    np.testing.assert_allclose(np.cov(t.T), C, atol=0.1 * np.abs(C).max())


def test_sample_field_rejects_empty():
    with pytest.raises(ValueError):
        sample_field(_field([0.0], [[1.0]]), 0, 1)


def test_max_functional_examples():
    assert np.all(max_functional(SampleBatch(np.full((3, 4), 2.5), (0,))) == 2.5)
    grid, _ = reference_grid(1, 41)
    x = grid[:, 0]
    assert max_functional(SampleBatch((0.5 * x * (1 - x))[None, :], (0,)))[0] == 0.125
    assert max_functional(SampleBatch(np.cumsum(np.ones((2, 9)), 1), (0,)))[1] == 9


@given(st.floats(-1e3, 1e3))
def test_max_commutes_with_shift(c):
    t = np.random.default_rng(5).normal(size=(4, 17))
    a = max_functional(SampleBatch(t + c, (0,)))
    np.testing.assert_array_equal(a, t.max(1) + c)


# -- rates --------------------------------------------------------------------------


def test_exact_power_law_fit():
    hs = np.geomspace(0.02, 0.25, 30)
    slope, icpt = fit_loglog_slope(hs, 3 * hs**2)
    assert abs(slope - 2) <= 1e-12
    assert abs(icpt - np.log(3)) <= 1e-12
    slope, _ = fit_loglog_slope(hs, np.full(30, 0.7))
    assert abs(slope) <= 1e-12


def test_fit_rejects_nonpositive():
    with pytest.raises(ValueError):
        fit_loglog_slope([0.1, 0.2], [0.0, 1.0])
    with pytest.raises(ValueError):
        fit_loglog_slope([0.1], [1.0])


@pytest.mark.parametrize("p", [1.0, 1.35, 2.0, 3.5])
def test_lr_exact_on_power_law(p):
    h = 0.1
    W = lambda a: a**p + (a / 2) ** p  # noqa: E731  W(eta_a, eta_a/2) for w(h) = h^p
    assert dyadic_log_ratio(W(h), W(h / 2)) == pytest.approx(p, abs=1e-12)


@given(st.floats(1e-6, 1e6), st.floats(1e-3, 1.0), st.floats(1e-3, 1.0))
def test_lr_scale_invariant(c, a, b):
    assert dyadic_log_ratio(c * a, c * b) == pytest.approx(dyadic_log_ratio(a, b), abs=1e-12)


def test_lr_equal_and_invalid():
    assert dyadic_log_ratio(0.3, 0.3) == 0
    with pytest.raises(ValueError):
        dyadic_log_ratio(0.0, 1.0)


def test_lr_with_bounded_noise():
    rng = np.random.default_rng(9)
    hs = np.sqrt(2) / np.arange(15, 40)
    noise = lambda: rng.uniform(0.95, 1.05)  # noqa: E731
    for h in hs:
        lr = dyadic_log_ratio(h**2 * noise(), (h / 2) ** 2 * noise())
        assert abs(lr - 2) <= 0.15


def test_smoothing_constant_and_alternating():
    hs = np.array([0.2, 0.14, 0.12, 0.1, 0.08])
    h_kept, s = smooth_lr(hs, np.full(5, 4.0), 0.15)
    np.testing.assert_allclose(h_kept, [0.14, 0.12, 0.1, 0.08])
    np.testing.assert_allclose(s, 2.0, atol=1e-15)
    _, s = smooth_lr([0.1, 0.09, 0.08, 0.07], [2.0, 8.0, 2.0, 8.0], 0.15)
    np.testing.assert_allclose(s, np.log2([2, 5, 4, 5]), rtol=1e-14)


def test_smoothing_orders_by_decreasing_h_and_needs_data():
    h_kept, s = smooth_lr([0.05, 0.1], [8.0, 2.0], 0.15)
    np.testing.assert_allclose(h_kept, [0.1, 0.05])
    np.testing.assert_allclose(s, np.log2([2, 5]))
    with pytest.raises(ValueError):
        smooth_lr([0.3, 0.2], [4.0, 4.0], 0.15)
