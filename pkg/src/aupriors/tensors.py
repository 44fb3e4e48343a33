"""Parameter-space primitives and the derivative-tensor contract.

A model enters the rest of the package as a :class:`DerivativeBundle`: a
rectangular open domain plus evaluators for the curvature matrix ``H``, the
information matrix ``I`` and the two third-order tensors ``J`` (Hessian-times-
score expectations, indexed ``[r, s, t]`` with ``(r, s)`` the Hessian pair)
and ``K`` (expected third log-likelihood derivatives, symmetric in all three
indices).  Central finite differences over these evaluators serve as the
independent oracle everywhere else.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import DomainViolation

Bound = Optional[float]  # None encodes an unbounded side; no inf arithmetic


def as_params(theta, dim: int | None = None) -> np.ndarray:
    """Coerce to a 1-d float vector, optionally checking its length."""
    arr = np.atleast_1d(np.asarray(theta, dtype=float))
    if arr.ndim != 1:
        raise ValueError(f"parameter point must be a vector, got shape {arr.shape}")
    if dim is not None and arr.size != dim:
        raise ValueError(f"expected {dim} coordinates, got {arr.size}")
    if not np.all(np.isfinite(arr)):
        raise DomainViolation(f"non-finite parameter point {arr}")
    return arr


@dataclass(frozen=True)
class RectDomain:
    """Open axis-aligned rectangle; ``None`` bounds mean unbounded sides."""

    lower: tuple[Bound, ...]
    upper: tuple[Bound, ...]

    def __post_init__(self):
        if len(self.lower) != len(self.upper) or len(self.lower) < 1:
            raise ValueError("lower/upper must be equal-length, non-empty tuples")
        for t, (lo, hi) in enumerate(zip(self.lower, self.upper)):
            if lo is not None and hi is not None and not lo < hi:
                raise ValueError(f"axis {t}: lower bound {lo} must be < upper bound {hi}")

    @property
    def dim(self) -> int:
        return len(self.lower)

    def contains(self, theta, margin=0.0) -> bool:
        """Strict interior test with a per-axis (or scalar) margin."""
        theta = as_params(theta, self.dim)
        margin = np.broadcast_to(np.asarray(margin, dtype=float), (self.dim,))
        for t in range(self.dim):
            lo, hi = self.lower[t], self.upper[t]
            if lo is not None and not theta[t] - margin[t] > lo:
                return False
            if hi is not None and not theta[t] + margin[t] < hi:
                return False
        return True

    def require_interior(self, theta, margin=0.0, what: str = "point") -> np.ndarray:
        theta = as_params(theta, self.dim)
        if not self.contains(theta, margin):
            raise DomainViolation(
                f"{what} {theta} is not interior to the domain with margin {margin}"
            )
        return theta


def reals(p: int) -> tuple[Bound, ...]:
    return (None,) * p


@dataclass(frozen=True)
class TensorTolerance:
    """Numerical tolerances shared by the finite-difference oracles.

    ``fd_step`` is scaled per coordinate by ``1 + |theta_t|`` so that steps
    survive the order-of-magnitude spread between regression coefficients
    and variance parameters.  ``cond_limit`` is the condition-number
    threshold above which a curvature matrix is treated as singular.
    """

    rel: float = 1e-6
    abs: float = 1e-9
    fd_step: float = 1e-5
    cond_limit: float = 1e12

    def __post_init__(self):
        for name in ("rel", "abs", "fd_step", "cond_limit"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be strictly positive")

    def steps(self, theta: np.ndarray) -> np.ndarray:
        return self.fd_step * (1.0 + np.abs(theta))

    def threshold(self, scale: float) -> float:
        return self.rel * (1.0 + abs(scale)) + self.abs


DEFAULT_TOL = TensorTolerance()


@dataclass(frozen=True)
class DerivativeBundle:
    """A model's derivative tensors behind a uniform evaluator contract.

    All evaluators are pure functions of the parameter point (and data,
    where applicable); instances are immutable and safe to share across
    threads.  ``eval_J[r, s, t]`` pairs Hessian indices ``(r, s)`` with the
    score index ``t``; ``eval_K`` is symmetric under index permutations.
    """

    name: str
    domain: RectDomain
    eval_H: Callable[[np.ndarray], np.ndarray]
    eval_I: Callable[[np.ndarray], np.ndarray]
    eval_J: Callable[[np.ndarray], np.ndarray]
    eval_K: Callable[[np.ndarray], np.ndarray]
    iid: bool = False
    log_likelihood: Optional[Callable] = None
    generate: Optional[Callable] = None
    closed_posterior_mean: Optional[Callable] = None

    @property
    def dim(self) -> int:
        return self.domain.dim


def fd_gradient(f, theta, tol: TensorTolerance = DEFAULT_TOL,
                domain: RectDomain | None = None) -> np.ndarray:
    """Central-difference gradient of a scalar field, O(step^2) accurate.

    Raises :class:`DomainViolation` when the +/- step stencil would leave
    ``domain`` (when one is supplied).
    """
    theta = as_params(theta)
    h = tol.steps(theta)
    if domain is not None:
        domain.require_interior(theta, margin=h, what="finite-difference stencil")
    grad = np.empty(theta.size)
    for t in range(theta.size):
        up = theta.copy()
        dn = theta.copy()
        up[t] += h[t]
        dn[t] -= h[t]
        grad[t] = (f(up) - f(dn)) / (2.0 * h[t])
    return grad


def fd_jacobian(vf, theta, tol: TensorTolerance = DEFAULT_TOL,
                domain: RectDomain | None = None) -> np.ndarray:
    """Central-difference Jacobian of a vector field; column u holds
    d(vf)/d(theta_u)."""
    theta = as_params(theta)
    h = tol.steps(theta)
    if domain is not None:
        domain.require_interior(theta, margin=h, what="finite-difference stencil")
    cols = []
    for u in range(theta.size):
        up = theta.copy()
        dn = theta.copy()
        up[u] += h[u]
        dn[u] -= h[u]
        cols.append((np.asarray(vf(up), dtype=float)
                     - np.asarray(vf(dn), dtype=float)) / (2.0 * h[u]))
    return np.stack(cols, axis=-1)


def fd_matrix_derivative(mf, theta, tol: TensorTolerance = DEFAULT_TOL,
                         domain: RectDomain | None = None) -> np.ndarray:
    """Derivatives of a matrix field: result[r, s, t] = d M_rs / d theta_t."""
    theta = as_params(theta)
    h = tol.steps(theta)
    if domain is not None:
        domain.require_interior(theta, margin=h, what="finite-difference stencil")
    slabs = []
    for t in range(theta.size):
        up = theta.copy()
        dn = theta.copy()
        up[t] += h[t]
        dn[t] -= h[t]
        slabs.append((np.asarray(mf(up), dtype=float)
                      - np.asarray(mf(dn), dtype=float)) / (2.0 * h[t]))
    return np.stack(slabs, axis=-1)


def check_spd(M, tol: TensorTolerance = DEFAULT_TOL) -> bool:
    """True iff M is symmetric within tolerance and positive definite with a
    condition number below ``tol.cond_limit``.  Never raises."""
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        return False
    if not np.all(np.isfinite(M)):
        return False
    scale = np.max(np.abs(M)) if M.size else 0.0
    if np.max(np.abs(M - M.T)) > tol.threshold(scale):
        return False
    try:
        eigvals = np.linalg.eigvalsh(0.5 * (M + M.T))
    except np.linalg.LinAlgError:
        return False
    if eigvals[0] <= 0.0:
        return False
    return eigvals[-1] / eigvals[0] < tol.cond_limit


@dataclass(frozen=True)
class InformationIdentityReport:
    """Worst violation of d(I_rs)/d(theta_t) + J_rs,t + K_rst = 0."""

    max_violation: float
    worst_index: tuple[int, int, int]
    passed: bool


def verify_information_identity(bundle: DerivativeBundle, theta,
                                tol: TensorTolerance = DEFAULT_TOL
                                ) -> InformationIdentityReport:
    """Check the score/curvature identity numerically on an i.i.d. bundle.

    The information derivative comes from central differences of ``eval_I``
    so the check is independent of the analytic J and K implementations.
    Violations are reported, not raised.
    """
    if not bundle.iid:
        raise ValueError(f"bundle '{bundle.name}' is not flagged i.i.d.")
    theta = bundle.domain.require_interior(theta, margin=tol.steps(as_params(theta)))
    dI = fd_matrix_derivative(bundle.eval_I, theta, tol, bundle.domain)
    residual = dI + bundle.eval_J(theta) + bundle.eval_K(theta)
    flat = int(np.argmax(np.abs(residual)))
    worst = np.unravel_index(flat, residual.shape)
    max_violation = float(np.abs(residual).max())
    scale = max(np.max(np.abs(dI)), np.max(np.abs(bundle.eval_J(theta))),
                np.max(np.abs(bundle.eval_K(theta))))
    return InformationIdentityReport(
        max_violation=max_violation,
        worst_index=tuple(int(i) for i in worst),
        passed=max_violation <= tol.threshold(scale),
    )
