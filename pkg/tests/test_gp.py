import numpy as np
import pytest
from scipy.optimize import approx_fprime

from geogc.gp import (
    GpSurrogate,
    ei_from_moments,
    expected_improvement,
    expected_improvement_with_grad,
    matern52,
)


def test_matern_against_sklearn():
    kernels = pytest.importorskip("sklearn.gaussian_process.kernels")
    rng = np.random.default_rng(0)
    a, b = rng.random((7, 3)), rng.random((5, 3))
    ls = np.array([0.3, 0.8, 1.7])
    ref = 2.5 * kernels.Matern(length_scale=ls, nu=2.5)(a, b)
    np.testing.assert_allclose(matern52(a, b, ls, 2.5), ref, rtol=1e-12, atol=1e-14)


def test_posterior_against_sklearn():
    gpr = pytest.importorskip("sklearn.gaussian_process")
    kernels = pytest.importorskip("sklearn.gaussian_process.kernels")
    rng = np.random.default_rng(1)
    x = rng.random((12, 2))
    y = np.sin(4 * x[:, 0]) + x[:, 1]
    ours = GpSurrogate(np.array([0.4, 0.9]), 1.3, 1e-4, x, (y - y.mean()) / y.std(),
                       float(y.mean()), float(y.std()))
    k = 1.3 * kernels.Matern(length_scale=[0.4, 0.9], nu=2.5)
    ref = gpr.GaussianProcessRegressor(k, alpha=1e-4 + ours.jitter, optimizer=None)
    ref.fit(x, (y - y.mean()) / y.std())
    xq = rng.random((20, 2))
    mu_ref, sd_ref = ref.predict(xq, return_std=True)
    mu, sd = ours.predict(xq)
    np.testing.assert_allclose(mu, y.mean() + y.std() * mu_ref, atol=1e-8)
    np.testing.assert_allclose(sd, y.std() * sd_ref, atol=1e-6)


def test_fit_interpolates_noiseless_line():
    x = np.linspace(0, 1, 5)[:, None]
    gp = GpSurrogate.fit(x, x[:, 0], np.random.default_rng(0), noise_var=1e-8)
    np.testing.assert_allclose(gp.predict(x, return_std=False), x[:, 0], atol=1e-6)


def test_fit_identical_points():
    x = np.array([[0.3, 0.3], [0.3, 0.3]])
    gp = GpSurrogate.fit(x, [2.0, 2.0])
    assert gp.predict([[0.3, 0.3]], return_std=False)[0] == pytest.approx(2.0, abs=1e-6)


def test_variance_shrinks_at_data():
    rng = np.random.default_rng(2)
    x = rng.random((8, 3)) * 0.3
    gp = GpSurrogate.fit(x, np.sum(x, axis=1), rng)
    _, sd_near = gp.predict(x[:1])
    _, sd_far = gp.predict([[1.0, 1.0, 1.0]])
    assert sd_near[0] <= sd_far[0]


def test_fit_reproduces_targets_within_noise():
    rng = np.random.default_rng(3)
    x = rng.random((15, 6))
    y = np.sum((x - 0.5) ** 2, axis=1)
    gp = GpSurrogate.fit(x, y, rng)
    mu = gp.predict(x, return_std=False)
    assert np.all(np.abs(mu - y) <= 3 * np.sqrt(gp.noise_var) * gp.y_scale + 1e-6)


def test_fit_needs_two_points():
    with pytest.raises(ValueError):
        GpSurrogate.fit([[0.1]], [1.0])


def test_ei_closed_form_examples():
    assert ei_from_moments(0.0, 0.0, 0.0) == 0.0
    assert ei_from_moments(-1.0, 1e-15, 0.0) == pytest.approx(1.0)
    assert ei_from_moments(0.0, 1.0, 0.0) == pytest.approx(0.3989422804014327, abs=1e-15)


def test_ei_monte_carlo_oracle():
    rng = np.random.default_rng(4)
    for mu, sd, best in [(0.0, 1.0, 0.0), (0.3, 0.5, 0.1), (-1.0, 2.0, 0.5)]:
        y = rng.normal(mu, sd, size=2_000_000)
        mc = np.mean(np.maximum(best - y, 0))
        assert ei_from_moments(mu, sd, best) == pytest.approx(mc, abs=3e-3)


def test_ei_nonnegative_and_monotone_in_std():
    mu = np.linspace(-3, 3, 61)
    for best in (-1.0, 0.0, 2.0):
        prev = None
        for sd in (0.1, 0.5, 1.0, 2.0):
            ei = ei_from_moments(mu, sd, best)
            assert np.all(ei >= 0)
            if prev is not None:
                assert np.all(ei >= prev - 1e-15)
            prev = ei


def test_ei_gradient_matches_finite_differences():
    rng = np.random.default_rng(5)
    x = rng.random((10, 4))
    y = np.sum(x**2, axis=1)
    gp = GpSurrogate.fit(x, y, rng)
    for _ in range(20):
        u = rng.random(4)
        val, grad = expected_improvement_with_grad(gp, u, y.min())
        assert val == pytest.approx(expected_improvement(gp, u, y.min()), abs=1e-14)
        fd = approx_fprime(u, lambda q: expected_improvement(gp, q, y.min()), 1e-7)
        assert np.allclose(grad, fd, atol=1e-5 * max(1.0, np.abs(fd).max()))
