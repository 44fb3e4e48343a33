"""Normal model in its two catalog parameterizations.

Both share the sample functions (mean, centered sum of squares); they
differ in the second coordinate (variance vs standard deviation), the
derivative tensors, and the closed-form posterior summaries.
"""

from __future__ import annotations

import math

import numpy as np
from scipy import stats

from ..errors import DegenerateSample
from ..tensors import DerivativeBundle, RectDomain, as_params

_DOMAIN = RectDomain(lower=(None, 0.0), upper=(None, None))


def _sample_stats(data):
    x = np.asarray(data, dtype=float)
    if x.size < 2:
        raise DegenerateSample("need at least two observations")
    xbar = float(x.mean())
    ss = float(np.sum((x - xbar) ** 2))
    if ss <= 0.0:
        raise DegenerateSample("zero sample variation")
    return x.size, xbar, ss


class NormalMeanVarModel:
    """theta = (mu, sigma^2); prior sigma^-4 gives the exactly unbiased
    (xbar, S^2/(n-1)) posterior mean."""

    domain = _DOMAIN
    dim = 2
    param_names = ("mu", "sigma2")

    def bundle(self) -> DerivativeBundle:
        return DerivativeBundle(
            name="normal-meanvar", domain=self.domain,
            eval_H=self._info, eval_I=self._info,
            eval_J=self._j_tensor, eval_K=self._k_tensor, iid=True,
            log_likelihood=self.log_likelihood, generate=self.generate,
            closed_posterior_mean=self.posterior_mean,
        )

    @staticmethod
    def _info(theta):
        _, v = as_params(theta, 2)
        return np.diag([1.0 / v, 0.5 / v ** 2])

    @staticmethod
    def _j_tensor(theta):
        _, v = as_params(theta, 2)
        J = np.zeros((2, 2, 2))
        J[0, 1, 0] = J[1, 0, 0] = -1.0 / v ** 2
        J[1, 1, 1] = -1.0 / v ** 3
        return J

    @staticmethod
    def _k_tensor(theta):
        _, v = as_params(theta, 2)
        K = np.zeros((2, 2, 2))
        K[0, 0, 1] = K[0, 1, 0] = K[1, 0, 0] = 1.0 / v ** 2
        K[1, 1, 1] = 2.0 / v ** 3
        return K

    @staticmethod
    def log_likelihood(data, theta) -> float:
        mu, v = as_params(theta, 2)
        x = np.asarray(data, dtype=float)
        return float(-0.5 * x.size * np.log(2.0 * np.pi * v)
                     - np.sum((x - mu) ** 2) / (2.0 * v))

    @staticmethod
    def catalog_log_prior(theta) -> float:
        _, v = as_params(theta, 2)
        return -2.0 * float(np.log(v))

    @staticmethod
    def generate(theta, size: int, rng: np.random.Generator) -> np.ndarray:
        mu, v = as_params(theta, 2)
        return mu + math.sqrt(v) * rng.standard_normal(size)

    @staticmethod
    def posterior_mean(data) -> np.ndarray:
        n, xbar, ss = _sample_stats(data)
        return np.array([xbar, ss / (n - 1)])

    @staticmethod
    def credible_interval(data, level: float = 0.95) -> np.ndarray:
        # mu | data is a scaled t with n+1 df; sigma^2 | data an inverse
        # gamma with shape (n+1)/2 and scale S^2/2
        n, xbar, ss = _sample_stats(data)
        tail = 0.5 * (1.0 - level)
        mu_scale = math.sqrt(ss / (n * (n + 1)))
        mu_lo, mu_hi = xbar + mu_scale * stats.t.ppf([tail, 1.0 - tail], df=n + 1)
        v_lo, v_hi = stats.invgamma.ppf([tail, 1.0 - tail],
                                        0.5 * (n + 1), scale=0.5 * ss)
        return np.array([[mu_lo, mu_hi], [v_lo, v_hi]])


class NormalLocScaleModel:
    """theta = (mu, sigma); prior sigma^-2 gives exactly unbiased estimates
    of both the location and the scale."""

    domain = _DOMAIN
    dim = 2
    param_names = ("mu", "sigma")

    def bundle(self) -> DerivativeBundle:
        return DerivativeBundle(
            name="normal-locscale", domain=self.domain,
            eval_H=self._info, eval_I=self._info,
            eval_J=self._j_tensor, eval_K=self._k_tensor, iid=True,
            log_likelihood=self.log_likelihood, generate=self.generate,
            closed_posterior_mean=self.posterior_mean,
        )

    @staticmethod
    def _info(theta):
        _, s = as_params(theta, 2)
        return np.diag([1.0 / s ** 2, 2.0 / s ** 2])

    @staticmethod
    def _j_tensor(theta):
        _, s = as_params(theta, 2)
        J = np.zeros((2, 2, 2))
        J[0, 1, 0] = J[1, 0, 0] = -2.0 / s ** 3
        J[1, 1, 1] = -6.0 / s ** 3
        return J

    @staticmethod
    def _k_tensor(theta):
        _, s = as_params(theta, 2)
        K = np.zeros((2, 2, 2))
        K[0, 0, 1] = K[0, 1, 0] = K[1, 0, 0] = 2.0 / s ** 3
        K[1, 1, 1] = 10.0 / s ** 3
        return K

    @staticmethod
    def log_likelihood(data, theta) -> float:
        mu, s = as_params(theta, 2)
        x = np.asarray(data, dtype=float)
        return float(-x.size * np.log(s) - 0.5 * x.size * np.log(2.0 * np.pi)
                     - np.sum((x - mu) ** 2) / (2.0 * s ** 2))

    @staticmethod
    def catalog_log_prior(theta) -> float:
        _, s = as_params(theta, 2)
        return -2.0 * float(np.log(s))

    @staticmethod
    def generate(theta, size: int, rng: np.random.Generator) -> np.ndarray:
        mu, s = as_params(theta, 2)
        return mu + s * rng.standard_normal(size)

    @staticmethod
    def posterior_mean(data) -> np.ndarray:
        n, xbar, ss = _sample_stats(data)
        s_hat = (math.exp(math.lgamma(0.5 * (n - 1)) - math.lgamma(0.5 * n))
                 / math.sqrt(2.0)) * math.sqrt(ss)
        return np.array([xbar, s_hat])

    @staticmethod
    def credible_interval(data, level: float = 0.95) -> np.ndarray:
        # mu | data: scaled t with n df; sigma^2 | data: inverse gamma with
        # shape n/2 and scale S^2/2, mapped through sqrt for sigma
        n, xbar, ss = _sample_stats(data)
        tail = 0.5 * (1.0 - level)
        mu_scale = math.sqrt(ss) / n
        mu_lo, mu_hi = xbar + mu_scale * stats.t.ppf([tail, 1.0 - tail], df=n)
        v_lo, v_hi = stats.invgamma.ppf([tail, 1.0 - tail], 0.5 * n, scale=0.5 * ss)
        return np.array([[mu_lo, mu_hi], [math.sqrt(v_lo), math.sqrt(v_hi)]])
