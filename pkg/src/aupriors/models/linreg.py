"""Gaussian linear regression with a fixed design, two parameterizations.

The derivative tensors use the finite-n design average C = X'X/n directly;
the resulting field is (0, ..., 0, -2/sigma^2) or (0, ..., 0, -2/sigma)
regardless of the design, so nothing is lost by not taking a limit.
"""

from __future__ import annotations

import math

import numpy as np
from scipy import stats

from ..errors import DegenerateSample
from ..tensors import DerivativeBundle, RectDomain, as_params, reals

_COV_MEAN = np.array([1.0, 2.0])
_COV_CHOL = np.linalg.cholesky(np.array([[4.0, 1.0], [1.0, 1.0]]))


def default_design(n: int, seed: int = 0) -> np.ndarray:
    """Deterministic n x 2 design with rows from the standard covariate
    distribution used throughout the simulations."""
    rng = np.random.Generator(np.random.Philox(seed))
    return _COV_MEAN + rng.standard_normal((n, 2)) @ _COV_CHOL.T


class LinRegModel:
    """y ~ N(X beta, sigma^2 I); parameterization 'variance' estimates
    (beta, sigma^2), 'stddev' estimates (beta, sigma)."""

    def __init__(self, X, parameterization: str = "variance"):
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or X.shape[0] <= X.shape[1]:
            raise ValueError("design must be n x p with n > p")
        if parameterization not in ("variance", "stddev"):
            raise ValueError(f"unknown parameterization '{parameterization}'")
        gram = X.T @ X
        if np.linalg.eigvalsh(gram)[0] <= 0:
            raise ValueError("design gram matrix must be positive definite")
        self.X = X
        self.parameterization = parameterization
        self.n, self.p_beta = X.shape
        self.dim = self.p_beta + 1
        self.domain = RectDomain(lower=reals(self.p_beta) + (0.0,),
                                 upper=reals(self.p_beta) + (None,))
        self.param_names = tuple(f"beta{j + 1}" for j in range(self.p_beta)) + (
            ("sigma2",) if parameterization == "variance" else ("sigma",))
        self._C = gram / self.n
        self._gram_inv = np.linalg.inv(gram)
        self._proj = self._gram_inv @ X.T

    # -- derivative tensors -------------------------------------------------

    def bundle(self) -> DerivativeBundle:
        return DerivativeBundle(
            name=f"linreg-{'var' if self.parameterization == 'variance' else 'sd'}",
            domain=self.domain,
            eval_H=self._info, eval_I=self._info,
            eval_J=self._j_tensor, eval_K=self._k_tensor, iid=False,
            log_likelihood=self.log_likelihood, generate=self.generate,
            closed_posterior_mean=self.posterior_mean,
        )

    def _split(self, theta):
        theta = as_params(theta, self.dim)
        return theta[:-1], float(theta[-1])

    def _info(self, theta):
        _, scale = self._split(theta)
        p = self.p_beta
        out = np.zeros((self.dim, self.dim))
        if self.parameterization == "variance":
            out[:p, :p] = self._C / scale
            out[p, p] = 0.5 / scale ** 2
        else:
            out[:p, :p] = self._C / scale ** 2
            out[p, p] = 2.0 / scale ** 2
        return out

    def _j_tensor(self, theta):
        _, scale = self._split(theta)
        p = self.p_beta
        J = np.zeros((self.dim, self.dim, self.dim))
        if self.parameterization == "variance":
            J[:p, p, :p] = -self._C / scale ** 2
            J[p, :p, :p] = -self._C / scale ** 2
            J[p, p, p] = -1.0 / scale ** 3
        else:
            J[:p, p, :p] = -2.0 * self._C / scale ** 3
            J[p, :p, :p] = -2.0 * self._C / scale ** 3
            J[p, p, p] = -6.0 / scale ** 3
        return J

    def _k_tensor(self, theta):
        _, scale = self._split(theta)
        p = self.p_beta
        K = np.zeros((self.dim, self.dim, self.dim))
        if self.parameterization == "variance":
            K[:p, :p, p] = self._C / scale ** 2
            K[:p, p, :p] = self._C / scale ** 2
            K[p, :p, :p] = self._C / scale ** 2
            K[p, p, p] = 2.0 / scale ** 3
        else:
            K[:p, :p, p] = 2.0 * self._C / scale ** 3
            K[:p, p, :p] = 2.0 * self._C / scale ** 3
            K[p, :p, :p] = 2.0 * self._C / scale ** 3
            K[p, p, p] = 10.0 / scale ** 3
        return K

    # -- likelihood / prior / sampling --------------------------------------

    def log_likelihood(self, data, theta) -> float:
        beta, scale = self._split(theta)
        y = np.asarray(data, dtype=float)
        v = scale if self.parameterization == "variance" else scale ** 2
        resid = y - self.X @ beta
        return float(-0.5 * self.n * np.log(2.0 * np.pi * v)
                     - resid @ resid / (2.0 * v))

    def catalog_log_prior(self, theta) -> float:
        _, scale = self._split(theta)
        return -2.0 * float(np.log(scale))

    def generate(self, theta, rng: np.random.Generator) -> np.ndarray:
        beta, scale = self._split(theta)
        sigma = math.sqrt(scale) if self.parameterization == "variance" else scale
        return self.X @ beta + sigma * rng.standard_normal(self.n)

    def _fit(self, y):
        y = np.asarray(y, dtype=float)
        if y.shape != (self.n,):
            raise ValueError(f"response must have shape ({self.n},)")
        beta_hat = self._proj @ y
        rss = float(y @ (y - self.X @ beta_hat))
        if rss <= 1e-10 * max(1.0, float(y @ y)):
            raise DegenerateSample("exact fit: zero residual sum of squares")
        return beta_hat, rss

    def posterior_mean(self, data) -> np.ndarray:
        beta_hat, rss = self._fit(data)
        dof = self.n - self.p_beta
        if self.parameterization == "variance":
            tail = rss / dof
        else:
            tail = (math.exp(math.lgamma(0.5 * dof) - math.lgamma(0.5 * (dof + 1)))
                    / math.sqrt(2.0)) * math.sqrt(rss)
        return np.append(beta_hat, tail)

    def credible_interval(self, data, level: float = 0.95) -> np.ndarray:
        beta_hat, rss = self._fit(data)
        dof = self.n - self.p_beta
        tail = 0.5 * (1.0 - level)
        if self.parameterization == "variance":
            a = 0.5 * dof + 1.0
        else:
            a = 0.5 * (dof + 1.0)
        # beta_j | data: scaled t with 2a df around the least-squares fit
        t_lo, t_hi = stats.t.ppf([tail, 1.0 - tail], df=2.0 * a)
        scales = np.sqrt(0.5 * rss / a * np.diag(self._gram_inv))
        rows = [[beta_hat[j] + scales[j] * t_lo, beta_hat[j] + scales[j] * t_hi]
                for j in range(self.p_beta)]
        v_lo, v_hi = stats.invgamma.ppf([tail, 1.0 - tail], a, scale=0.5 * rss)
        if self.parameterization == "variance":
            rows.append([v_lo, v_hi])
        else:
            rows.append([math.sqrt(v_lo), math.sqrt(v_hi)])
        return np.array(rows)
