"""Gamma model with shape theta_1 and scale theta_2.

The catalog keeps it as the counterexample: its candidate field fails the
Jacobian-symmetry test, so no sample-size-free bias-cancelling prior
exists and there is no closed-form prior or posterior mean here.
"""

from __future__ import annotations

import math

import numpy as np

from ..special import trigamma, trigamma_deriv
from ..tensors import DerivativeBundle, RectDomain, as_params

_DOMAIN = RectDomain(lower=(0.0, 0.0), upper=(None, None))


class GammaModel:
    domain = _DOMAIN
    dim = 2
    param_names = ("shape", "scale")

    def bundle(self) -> DerivativeBundle:
        return DerivativeBundle(
            name="gamma", domain=self.domain,
            eval_H=self._info, eval_I=self._info,
            eval_J=self._j_tensor, eval_K=self._k_tensor, iid=True,
            log_likelihood=self.log_likelihood, generate=self.generate,
        )

    @staticmethod
    def _info(theta):
        a, s = as_params(theta, 2)
        return np.array([[trigamma(a), 1.0 / s],
                         [1.0 / s, a / s ** 2]])

    @staticmethod
    def _j_tensor(theta):
        a, s = as_params(theta, 2)
        J = np.zeros((2, 2, 2))
        # non-random Hessian entries pair with mean-zero scores elsewhere
        J[1, 1, 0] = -2.0 / s ** 2
        J[1, 1, 1] = -2.0 * a / s ** 3
        return J

    @staticmethod
    def _k_tensor(theta):
        a, s = as_params(theta, 2)
        K = np.zeros((2, 2, 2))
        K[0, 0, 0] = -trigamma_deriv(a)
        K[0, 1, 1] = K[1, 0, 1] = K[1, 1, 0] = 1.0 / s ** 2
        K[1, 1, 1] = 4.0 * a / s ** 3
        return K

    @staticmethod
    def closed_phi(theta) -> np.ndarray:
        """Closed form of the candidate field, for cross-checking."""
        a, s = as_params(theta, 2)
        lam = trigamma(a)
        det = a * lam - 1.0
        return np.array([(a * trigamma_deriv(a) - lam) / det,
                         -2.0 * a * lam / (s * det)])

    @staticmethod
    def log_likelihood(data, theta) -> float:
        a, s = as_params(theta, 2)
        x = np.asarray(data, dtype=float)
        return float(np.sum((a - 1.0) * np.log(x) - x / s)
                     - x.size * (math.lgamma(a) + a * math.log(s)))

    @staticmethod
    def generate(theta, size: int, rng: np.random.Generator) -> np.ndarray:
        a, s = as_params(theta, 2)
        return s * rng.standard_gamma(a, size)
