"""Nested error regression: grouped responses with an area random effect.

y_ij = x_ij' beta + v_i + eps_ij, v_i ~ N(0, tau^2), eps_ij ~ N(0, sigma^2),
theta = (beta, tau^2, sigma^2).  The per-area covariance tau^2 11' +
sigma^2 I diagonalizes over the area-mean projection, so every tensor entry
reduces to scalar averages over areas; at finite m those averages are used
directly (they are exact in the balanced case).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from ..errors import DomainViolation
from ..tensors import DerivativeBundle, RectDomain, as_params, reals

COVARIATE_MEAN = np.array([1.0, 2.0])
COVARIATE_COV = np.array([[4.0, 1.0], [1.0, 1.0]])
_COVARIATE_CHOL = np.linalg.cholesky(COVARIATE_COV)

_PD_EIG_TOL = 1e-10  # relative floor certifying strict positive definiteness


@dataclass(frozen=True)
class NerDataset:
    """Grouped responses and covariates, one block per area."""

    y: tuple[np.ndarray, ...]
    x: tuple[np.ndarray, ...]
    theta_true: Optional[np.ndarray] = None

    def __post_init__(self):
        if len(self.y) != len(self.x) or not self.y:
            raise ValueError("need matching, non-empty response/covariate blocks")
        for yi, xi in zip(self.y, self.x):
            if yi.shape[0] != xi.shape[0]:
                raise ValueError("area block sizes disagree between y and x")

    @property
    def m(self) -> int:
        return len(self.y)

    @property
    def n_units(self) -> tuple[int, ...]:
        return tuple(len(yi) for yi in self.y)

    @property
    def p(self) -> int:
        return self.x[0].shape[1]

    @property
    def balanced(self) -> bool:
        return len(set(self.n_units)) == 1

    @property
    def total_units(self) -> int:
        return sum(self.n_units)


class NerModel:
    """Design-side description: area count, per-area unit counts, covariates."""

    def __init__(self, x_blocks: Sequence[np.ndarray]):
        x_blocks = tuple(np.asarray(b, dtype=float) for b in x_blocks)
        if not x_blocks:
            raise ValueError("need at least one area")
        p = x_blocks[0].shape[1]
        if any(b.ndim != 2 or b.shape[1] != p for b in x_blocks):
            raise ValueError("covariate blocks must share the column count")
        self.x_blocks = x_blocks
        self.m = len(x_blocks)
        self.n_units = tuple(b.shape[0] for b in x_blocks)
        self.p = p
        self.dim = p + 2
        self.balanced = len(set(self.n_units)) == 1
        self.domain = RectDomain(lower=reals(p) + (0.0, 0.0),
                                 upper=reals(p) + (None, None))
        self.param_names = tuple(f"beta{j + 1}" for j in range(p)) + ("tau2", "sigma2")

    @classmethod
    def balanced_design(cls, m: int, n: int, p: int = 2,
                        rng: np.random.Generator | None = None,
                        seed: int = 0) -> "NerModel":
        return cls.from_unit_counts([n] * m, p=p, rng=rng, seed=seed)

    @classmethod
    def from_unit_counts(cls, n_units: Sequence[int], p: int = 2,
                         rng: np.random.Generator | None = None,
                         seed: int = 0) -> "NerModel":
        if rng is None:
            rng = np.random.Generator(np.random.Philox(seed))
        blocks = [draw_covariates(int(n), p, rng) for n in n_units]
        return cls(blocks)

    # -- derivative tensors --------------------------------------------------

    def bundle(self) -> DerivativeBundle:
        return DerivativeBundle(
            name="ner-balanced" if self.balanced else "ner",
            domain=self.domain,
            eval_H=self._info, eval_I=self._info,
            eval_J=self._j_tensor, eval_K=self._k_tensor, iid=False,
            log_likelihood=self.log_likelihood,
            generate=lambda theta, rng: generate_ner(self, theta, rng),
        )

    def _variances(self, theta):
        theta = as_params(theta, self.dim)
        tau2, sigma2 = theta[-2], theta[-1]
        if not (tau2 > 0.0 and sigma2 > 0.0):
            raise DomainViolation(f"variance components must be positive, got {theta}")
        return tau2, sigma2

    def _area_scalars(self, tau2, sigma2):
        n = np.asarray(self.n_units, dtype=float)
        sbar = sigma2 + n * tau2  # eigenvalue on the area-mean direction
        return n, sbar

    def _info(self, theta) -> np.ndarray:
        tau2, sigma2 = self._variances(theta)
        n, sbar = self._area_scalars(tau2, sigma2)
        p = self.p
        out = np.zeros((self.dim, self.dim))
        beta_block = np.zeros((p, p))
        for xi, ni, si in zip(self.x_blocks, n, sbar):
            ai = xi.T @ np.ones(int(ni))
            # x' V^{-1} x with V^{-1} = (I - P)/sigma2 + P/sbar, P = 11'/n
            beta_block += (xi.T @ xi - np.outer(ai, ai) / ni) / sigma2 \
                + np.outer(ai, ai) / (ni * si)
        out[:p, :p] = beta_block / self.m
        tr_v2 = np.mean(sbar ** -2 + (n - 1.0) / sigma2 ** 2)
        out[p, p] = 0.5 * np.mean(n ** 2 / sbar ** 2)
        out[p, p + 1] = out[p + 1, p] = 0.5 * np.mean(n / sbar ** 2)
        out[p + 1, p + 1] = 0.5 * tr_v2
        return out

    def _mixed_blocks(self, tau2, sigma2):
        """Averages of a a'/sbar^2 and x'V^-2 x over areas (p x p each)."""
        n, sbar = self._area_scalars(tau2, sigma2)
        p = self.p
        tau_block = np.zeros((p, p))
        sig_block = np.zeros((p, p))
        for xi, ni, si in zip(self.x_blocks, n, sbar):
            ai = xi.T @ np.ones(int(ni))
            outer = np.outer(ai, ai)
            tau_block += outer / si ** 2
            # x' V^{-2} x = (x'x - a a'/n)/sigma2^2 + a a'/(n sbar^2)
            sig_block += (xi.T @ xi - outer / ni) / sigma2 ** 2 \
                + outer / (ni * si ** 2)
        return tau_block / self.m, sig_block / self.m

    def _j_tensor(self, theta) -> np.ndarray:
        tau2, sigma2 = self._variances(theta)
        n, sbar = self._area_scalars(tau2, sigma2)
        p = self.p
        J = np.zeros((self.dim, self.dim, self.dim))
        tau_block, sig_block = self._mixed_blocks(tau2, sigma2)
        # Hessian pair (beta_r, variance), score beta_s
        J[:p, p, :p] = -tau_block
        J[p, :p, :p] = -tau_block
        J[:p, p + 1, :p] = -sig_block
        J[p + 1, :p, :p] = -sig_block
        k3 = np.mean(n ** 3 / sbar ** 3)
        k2 = np.mean(n ** 2 / sbar ** 3)
        k1 = np.mean(n / sbar ** 3)
        tr_v3 = np.mean(sbar ** -3 + (n - 1.0) / sigma2 ** 3)
        J[p, p, p] = -k3
        J[p, p, p + 1] = -k2
        J[p, p + 1, p] = J[p + 1, p, p] = -k2
        J[p, p + 1, p + 1] = J[p + 1, p, p + 1] = -k1
        J[p + 1, p + 1, p] = -k1
        J[p + 1, p + 1, p + 1] = -tr_v3
        return J

    def _k_tensor(self, theta) -> np.ndarray:
        tau2, sigma2 = self._variances(theta)
        n, sbar = self._area_scalars(tau2, sigma2)
        p = self.p
        K = np.zeros((self.dim, self.dim, self.dim))
        tau_block, sig_block = self._mixed_blocks(tau2, sigma2)
        K[:p, :p, p] = tau_block
        K[:p, p, :p] = tau_block
        K[p, :p, :p] = tau_block
        K[:p, :p, p + 1] = sig_block
        K[:p, p + 1, :p] = sig_block
        K[p + 1, :p, :p] = sig_block
        k3 = np.mean(n ** 3 / sbar ** 3)
        k2 = np.mean(n ** 2 / sbar ** 3)
        k1 = np.mean(n / sbar ** 3)
        tr_v3 = np.mean(sbar ** -3 + (n - 1.0) / sigma2 ** 3)
        K[p, p, p] = 2.0 * k3
        for idx in ((p, p, p + 1), (p, p + 1, p), (p + 1, p, p)):
            K[idx] = 2.0 * k2
        for idx in ((p, p + 1, p + 1), (p + 1, p, p + 1), (p + 1, p + 1, p)):
            K[idx] = 2.0 * k1
        K[p + 1, p + 1, p + 1] = 2.0 * tr_v3
        return K

    # -- likelihood / prior --------------------------------------------------

    def log_likelihood(self, data: NerDataset, theta) -> float:
        theta = as_params(theta, self.dim)
        beta = theta[:self.p]
        tau2, sigma2 = self._variances(theta)
        total = 0.0
        for yi, xi in zip(data.y, data.x):
            ni = len(yi)
            si = sigma2 + ni * tau2
            u = yi - xi @ beta
            usum = u.sum()
            quad = (u @ u - usum ** 2 / ni) / sigma2 + usum ** 2 / (ni * si)
            logdet = np.log(si) + (ni - 1) * np.log(sigma2)
            total += -0.5 * (ni * np.log(2.0 * np.pi) + logdet + quad)
        return float(total)

    def catalog_log_prior(self, theta) -> float:
        tau2, sigma2 = self._variances(theta)
        if self.balanced:
            n = self.n_units[0]
            return float(-2.0 * np.log(sigma2) - 2.0 * np.log(sigma2 + n * tau2))
        return float(-2.0 * np.log(sigma2) + np.log(ner_g(self, tau2, sigma2)))


def draw_covariates(n: int, p: int, rng: np.random.Generator) -> np.ndarray:
    """Unit covariates; the two-column design uses the standard bivariate
    normal from the simulation studies, other widths fall back to shifted
    standard normals."""
    if p == 2:
        return COVARIATE_MEAN + rng.standard_normal((n, 2)) @ _COVARIATE_CHOL.T
    return 1.0 + rng.standard_normal((n, p))


def ner_g(model: NerModel, tau2: float, sigma2: float) -> float:
    """Design factor of the grouped-model prior.

    Balanced designs use the closed form n^2 (n-1) (sigma^2 + n tau^2)^-2;
    the general branch assembles it from the four per-area averages.
    """
    if not (tau2 > 0.0 and sigma2 > 0.0):
        raise DomainViolation("variance components must be positive")
    if model.balanced:
        n = model.n_units[0]
        return float(n * n * (n - 1) / (sigma2 + n * tau2) ** 2)
    return _g_from_averages(model.n_units, tau2, sigma2)


def _g_from_averages(n_units: Sequence[int], tau2: float, sigma2: float) -> float:
    n = np.asarray(n_units, dtype=float)
    sbar2 = (sigma2 + n * tau2) ** 2
    g1 = np.mean(n * (n - 1.0) / sbar2)
    g2 = np.mean(n / sbar2)
    g3 = np.mean(n ** 2 / sbar2)
    g4 = np.mean(n ** 2 * (n - 1.0) / sbar2)
    return float(g1 * g2 * sigma2 ** 2 + 2.0 * g1 * g3 * sigma2 * tau2
                 + g3 * g4 * tau2 ** 2)


def generate_ner(model: NerModel, theta_true, rng: np.random.Generator,
                 freeze_x: bool = False) -> NerDataset:
    """Simulate one grouped dataset at the given true parameter.

    Covariates are redrawn per dataset unless ``freeze_x`` keeps the model's
    design (variance-reduction studies).  Draw order is fixed (covariates,
    area effects, unit errors) so a dataset is a pure function of the
    stream state.
    """
    theta_true = model.domain.require_interior(theta_true, what="true parameter")
    beta = theta_true[:model.p]
    tau = np.sqrt(theta_true[-2])
    sigma = np.sqrt(theta_true[-1])
    total = sum(model.n_units)
    if freeze_x:
        x_blocks = model.x_blocks
    else:
        zx = rng.standard_normal((total, model.p))
        if model.p == 2:
            flat = COVARIATE_MEAN + zx @ _COVARIATE_CHOL.T
        else:
            flat = 1.0 + zx
        x_blocks = []
        offset = 0
        for ni in model.n_units:
            x_blocks.append(flat[offset:offset + ni])
            offset += ni
        x_blocks = tuple(x_blocks)
    v = tau * rng.standard_normal(model.m)
    eps = sigma * rng.standard_normal(total)
    y_blocks = []
    offset = 0
    for i, ni in enumerate(model.n_units):
        xi = x_blocks[i]
        y_blocks.append(xi @ beta + v[i] + eps[offset:offset + ni])
        offset += ni
    return NerDataset(y=tuple(y_blocks), x=x_blocks,
                      theta_true=np.asarray(theta_true, dtype=float))


@dataclass(frozen=True)
class ProprietyReport:
    """Per-area witnesses for the four posterior-propriety rank conditions.

    Conditions: (1) some area design has full column rank; (2) some area's
    [y x] has full column rank; (3) some area's within-area covariate
    scatter is strictly positive definite; (4) the same for [y x].  Each
    field holds the first witnessing area index, or None.
    """

    full_rank_x: Optional[int]
    full_rank_yx: Optional[int]
    scatter_x: Optional[int]
    scatter_yx: Optional[int]

    @property
    def conditions(self) -> tuple[bool, bool, bool, bool]:
        return (self.full_rank_x is not None, self.full_rank_yx is not None,
                self.scatter_x is not None, self.scatter_yx is not None)

    @property
    def verdict(self) -> bool:
        return all(self.conditions)


def _strictly_pd(mat: np.ndarray) -> bool:
    eigvals = np.linalg.eigvalsh(0.5 * (mat + mat.T))
    floor = _PD_EIG_TOL * max(1.0, float(eigvals[-1]))
    return bool(eigvals[0] > floor)


def check_propriety_conditions(data: NerDataset) -> ProprietyReport:
    """Evaluate the rank/definiteness conditions area by area.

    Strict positive definiteness (with an eigenvalue floor) is required for
    the scatter conditions; a semidefinite reading would hold vacuously.
    """
    witnesses = [None, None, None, None]
    for i, (yi, xi) in enumerate(zip(data.y, data.x)):
        ni, p = xi.shape
        yx = np.column_stack([yi, xi])
        if witnesses[0] is None and np.linalg.matrix_rank(xi) == p:
            witnesses[0] = i
        if witnesses[1] is None and np.linalg.matrix_rank(yx) == p + 1:
            witnesses[1] = i
        xc = xi - xi.mean(axis=0)
        if witnesses[2] is None and _strictly_pd(xc.T @ xc / ni):
            witnesses[2] = i
        yxc = yx - yx.mean(axis=0)
        if witnesses[3] is None and _strictly_pd(yxc.T @ yxc / ni):
            witnesses[3] = i
    return ProprietyReport(*witnesses)


def propriety_gate(data: NerDataset) -> bool:
    """Aggregate form of the propriety conditions, as the posterior-finiteness
    argument actually needs them.

    The per-area scatter conditions can fail for legitimate small-block
    designs (n_i <= p + 1) whose summed within-area scatters are still
    positive definite; the samplers gate on the aggregate matrices.
    """
    p = data.p
    agg_x = np.zeros((p, p))
    agg_yx = np.zeros((p + 1, p + 1))
    rank_x = rank_yx = False
    for yi, xi in zip(data.y, data.x):
        yx = np.column_stack([yi, xi])
        rank_x = rank_x or np.linalg.matrix_rank(xi) == p
        rank_yx = rank_yx or np.linalg.matrix_rank(yx) == p + 1
        xc = xi - xi.mean(axis=0)
        yxc = yx - yx.mean(axis=0)
        agg_x += xc.T @ xc
        agg_yx += yxc.T @ yxc
    return bool(rank_x and rank_yx and _strictly_pd(agg_x) and _strictly_pd(agg_yx))
