"""Bernoulli success probability, theta in (0, 1)."""

from __future__ import annotations

import numpy as np
from scipy import stats

from ..errors import DegenerateSample
from ..tensors import DerivativeBundle, RectDomain, as_params

_DOMAIN = RectDomain(lower=(0.0,), upper=(1.0,))


class BinomialModel:
    """i.i.d. Bernoulli draws; the bias-cancelling prior is the information
    itself, 1/(theta (1 - theta)), and the posterior mean is the sample
    mean."""

    domain = _DOMAIN
    dim = 1
    param_names = ("theta",)

    def bundle(self) -> DerivativeBundle:
        return DerivativeBundle(
            name="binomial",
            domain=self.domain,
            eval_H=self._info,
            eval_I=self._info,
            eval_J=self._j_tensor,
            eval_K=self._k_tensor,
            iid=True,
            log_likelihood=self.log_likelihood,
            generate=self.generate,
            closed_posterior_mean=self.posterior_mean,
        )

    @staticmethod
    def _info(theta):
        t = float(as_params(theta, 1)[0])
        return np.array([[1.0 / (t * (1.0 - t))]])

    @staticmethod
    def _j_tensor(theta):
        t = float(as_params(theta, 1)[0])
        return np.array([[[-1.0 / t ** 2 + 1.0 / (1.0 - t) ** 2]]])

    @staticmethod
    def _k_tensor(theta):
        t = float(as_params(theta, 1)[0])
        return np.array([[[2.0 / t ** 2 - 2.0 / (1.0 - t) ** 2]]])

    @staticmethod
    def log_likelihood(data, theta) -> float:
        t = float(as_params(theta, 1)[0])
        x = np.asarray(data, dtype=float)
        return float(np.sum(x * np.log(t) + (1.0 - x) * np.log1p(-t)))

    @staticmethod
    def catalog_log_prior(theta) -> float:
        t = float(as_params(theta, 1)[0])
        return -np.log(t) - np.log1p(-t)

    @staticmethod
    def generate(theta, size: int, rng: np.random.Generator) -> np.ndarray:
        t = float(as_params(theta, 1)[0])
        return (rng.random(size) < t).astype(float)

    @staticmethod
    def posterior_mean(data) -> np.ndarray:
        x = np.asarray(data, dtype=float)
        return np.array([float(x.mean())])

    @staticmethod
    def credible_interval(data, level: float = 0.95) -> np.ndarray:
        """Equal-tailed interval of the Beta(n xbar, n (1 - xbar)) posterior."""
        x = np.asarray(data, dtype=float)
        n = x.size
        a = n * x.mean()
        b = n - a
        if a <= 0.0 or b <= 0.0:
            raise DegenerateSample("all-equal Bernoulli sample")
        tail = 0.5 * (1.0 - level)
        lo, hi = stats.beta.ppf([tail, 1.0 - tail], a, b)
        return np.array([[lo, hi]])
