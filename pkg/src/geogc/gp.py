"""Gaussian-process surrogate (Matérn 5/2, ARD) and expected improvement.

Inputs live in the unit cube; objectives are standardized before fitting and
predictions are mapped back to objective units.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.linalg import cho_solve, cholesky
from scipy.optimize import minimize
from scipy.stats import norm

from .errors import SingularKernel

SQRT5 = math.sqrt(5.0)
BASE_JITTER = 1e-10
# log-space bounds for (lengthscales..., signal variance, noise variance)
LOG_LENGTHSCALE = (math.log(1e-2), math.log(20.0))
LOG_SIGNAL = (math.log(1e-2), math.log(1e2))
LOG_NOISE = (math.log(1e-8), math.log(1.0))


def matern52(a: np.ndarray, b: np.ndarray, lengthscales, signal_var: float) -> np.ndarray:
    diff = (a[:, None, :] - b[None, :, :]) / np.asarray(lengthscales)
    r = np.sqrt(np.maximum(np.sum(diff**2, axis=-1), 0.0))
    return signal_var * (1.0 + SQRT5 * r + 5.0 / 3.0 * r**2) * np.exp(-SQRT5 * r)


def _chol(k: np.ndarray):
    """Cholesky factor, retrying with 10x more jitter up to three times."""
    n = len(k)
    jitter = BASE_JITTER
    for _ in range(4):
        try:
            return cholesky(k + jitter * np.eye(n), lower=True), jitter
        except np.linalg.LinAlgError:
            jitter *= 10.0
    raise SingularKernel(f"kernel matrix not positive definite with jitter {jitter / 10:g}")


def _neg_lml(theta, x, y):
    """Negative log marginal likelihood and its gradient in log-parameters."""
    d = x.shape[1]
    ls = np.exp(theta[:d])
    sf2 = math.exp(theta[d])
    sn2 = math.exp(theta[d + 1])
    n = len(y)

    diff2 = ((x[:, None, :] - x[None, :, :]) / ls) ** 2
    r = np.sqrt(np.maximum(diff2.sum(-1), 0.0))
    e = np.exp(-SQRT5 * r)
    kf = sf2 * (1.0 + SQRT5 * r + 5.0 / 3.0 * r**2) * e
    try:
        l, _ = _chol(kf + sn2 * np.eye(n))
    except SingularKernel:
        return 1e25, np.zeros_like(theta)
    alpha = cho_solve((l, True), y)
    nll = 0.5 * y @ alpha + np.log(np.diag(l)).sum() + 0.5 * n * math.log(2 * math.pi)

    inner = np.outer(alpha, alpha) - cho_solve((l, True), np.eye(n))
    grad = np.empty_like(theta)
    common = sf2 * 5.0 / 3.0 * (1.0 + SQRT5 * r) * e
    for k in range(d):
        grad[k] = -0.5 * np.sum(inner * common * diff2[:, :, k])
    grad[d] = -0.5 * np.sum(inner * kf)
    grad[d + 1] = -0.5 * sn2 * np.trace(inner)
    return float(nll), grad


@dataclass
class GpSurrogate:
    lengthscales: np.ndarray
    signal_var: float
    noise_var: float
    x: np.ndarray
    y: np.ndarray  # standardized
    y_mean: float
    y_scale: float
    jitter: float = BASE_JITTER

    def __post_init__(self):
        k = matern52(self.x, self.x, self.lengthscales, self.signal_var)
        k += self.noise_var * np.eye(len(self.x))
        self._l, self.jitter = _chol(k)
        self._alpha = cho_solve((self._l, True), self.y)

    @property
    def dim(self) -> int:
        return self.x.shape[1]

    def predict(self, xq, return_std: bool = True):
        """Posterior mean and std of the latent objective at unit-cube points."""
        xq = np.atleast_2d(np.asarray(xq, dtype=np.float64))
        ks = matern52(xq, self.x, self.lengthscales, self.signal_var)
        mu = ks @ self._alpha
        if not return_std:
            return self.y_mean + self.y_scale * mu
        v = cho_solve((self._l, True), ks.T)
        var = np.maximum(self.signal_var - np.sum(ks * v.T, axis=1), 0.0)
        return self.y_mean + self.y_scale * mu, self.y_scale * np.sqrt(var)

    def predict_with_grad(self, u):
        """Mean, std and their gradients at one unit-cube point ``u``."""
        u = np.asarray(u, dtype=np.float64).reshape(-1)
        ls2 = np.asarray(self.lengthscales) ** 2
        delta = u[None, :] - self.x
        r = np.sqrt(np.sum(delta**2 / ls2, axis=1))
        e = np.exp(-SQRT5 * r)
        k = self.signal_var * (1.0 + SQRT5 * r + 5.0 / 3.0 * r**2) * e
        # d k / d u, finite at r = 0
        dk = (-self.signal_var * 5.0 / 3.0 * (1.0 + SQRT5 * r) * e)[:, None] * delta / ls2
        mu = float(k @ self._alpha)
        dmu = dk.T @ self._alpha
        v = cho_solve((self._l, True), k)
        var = self.signal_var - float(k @ v)
        if var <= 1e-300:
            return (self.y_mean + self.y_scale * mu, 0.0,
                    self.y_scale * dmu, np.zeros_like(u))
        sd = math.sqrt(var)
        dsd = -(dk.T @ v) / sd
        return (self.y_mean + self.y_scale * mu, self.y_scale * sd,
                self.y_scale * dmu, self.y_scale * dsd)

    @classmethod
    def fit(cls, x, y, rng: Optional[np.random.Generator] = None, restarts: int = 8,
            noise_var: Optional[float] = None) -> "GpSurrogate":
        """Maximize the log marginal likelihood from ``restarts`` starting points.

        ``noise_var`` pins the (standardized) noise variance instead of fitting it.
        """
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        y = np.asarray(y, dtype=np.float64).reshape(-1)
        if len(y) < 2:
            raise ValueError("need at least two observations to fit a GP")
        rng = np.random.default_rng(0) if rng is None else rng
        y_mean = float(y.mean())
        y_scale = float(y.std())
        if y_scale < 1e-12:
            y_scale = 1.0
        ys = (y - y_mean) / y_scale
        d = x.shape[1]

        bounds = [LOG_LENGTHSCALE] * d + [LOG_SIGNAL, LOG_NOISE]
        if noise_var is not None:
            ln = math.log(noise_var)
            bounds[-1] = (ln, ln)
        starts = [np.array([math.log(0.5)] * d + [0.0, max(math.log(1e-3), bounds[-1][0])])]
        lo = np.array([b[0] for b in bounds])
        hi = np.array([b[1] for b in bounds])
        for _ in range(restarts - 1):
            s = rng.uniform(lo, hi)
            s[:d] = rng.uniform(math.log(0.05), math.log(2.0), size=d)
            starts.append(s)
        if noise_var is not None:
            for s in starts:
                s[-1] = math.log(noise_var)

        best = None
        for s in starts:
            res = minimize(_neg_lml, s, args=(x, ys), jac=True, method="L-BFGS-B", bounds=bounds)
            if best is None or res.fun < best.fun:
                best = res
        theta = best.x
        return cls(
            lengthscales=np.exp(theta[:d]),
            signal_var=float(math.exp(theta[d])),
            noise_var=float(math.exp(theta[d + 1])),
            x=x, y=ys, y_mean=y_mean, y_scale=y_scale,
        )


def ei_from_moments(mu, sigma, best):
    """Closed-form E[max(best - Y, 0)] for Y ~ N(mu, sigma^2)."""
    mu = np.asarray(mu, dtype=np.float64)
    sigma = np.asarray(sigma, dtype=np.float64)
    improve = best - mu
    with np.errstate(divide="ignore", invalid="ignore"):
        z = improve / sigma
        ei = improve * norm.cdf(z) + sigma * norm.pdf(z)
    ei = np.where(sigma > 1e-12, ei, np.maximum(improve, 0.0))
    return np.maximum(ei, 0.0)


def expected_improvement(surrogate: GpSurrogate, candidates, best: float):
    """EI (minimization) at unit-cube candidate points; scalar for a single point."""
    single = np.asarray(candidates).ndim == 1
    mu, sd = surrogate.predict(candidates)
    ei = ei_from_moments(mu, sd, best)
    return float(ei[0]) if single else ei


def expected_improvement_with_grad(surrogate: GpSurrogate, u, best: float):
    """EI at one point and its gradient with respect to ``u``."""
    mu, sd, dmu, dsd = surrogate.predict_with_grad(u)
    if sd <= 1e-12:
        imp = best - mu
        return (imp, -dmu) if imp > 0 else (0.0, np.zeros_like(dmu))
    z = (best - mu) / sd
    cdf, pdf = float(norm.cdf(z)), float(norm.pdf(z))
    ei = (best - mu) * cdf + sd * pdf
    return max(ei, 0.0), -cdf * dmu + pdf * dsd
