"""Bias-cancelling prior fields: computation, existence test, construction.

The gradient that an unnormalized log prior must match is a vector field
``phi`` built from the model's derivative tensors.  A solving prior exists
iff the field's Jacobian is symmetric; when it is, the log prior is
recovered by integrating ``phi`` axis by axis from an anchor point.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import (DomainViolation, HNotEqualI, NonIntegrable,
                     NotDiagonal, SingularCurvature)
from .quadrature import adaptive_simpson
from .tensors import (DEFAULT_TOL, DerivativeBundle, RectDomain,
                      TensorTolerance, as_params, check_spd, fd_jacobian,
                      fd_matrix_derivative)


def phi_general(bundle: DerivativeBundle, theta,
                tol: TensorTolerance = DEFAULT_TOL) -> np.ndarray:
    """The log-prior gradient target for a general (non-i.i.d.) model.

    Componentwise ``-1/2 sum_{r,s} H^{rs} A_rs`` where the correction tensor
    is ``A[r,s,v] = K[v,r,s] + 2 J[v,r,s] + sum_{t,u} H^{tu} I[s,u] K[r,t,v]``.
    """
    theta = bundle.domain.require_interior(theta)
    H = bundle.eval_H(theta)
    if not check_spd(H, tol):
        raise SingularCurvature(f"curvature matrix of '{bundle.name}' at {theta}")
    Hinv = np.linalg.inv(H)
    I = bundle.eval_I(theta)
    J = bundle.eval_J(theta)
    K = bundle.eval_K(theta)
    A = (np.transpose(K, (1, 2, 0)) + 2.0 * np.transpose(J, (1, 2, 0))
         + np.einsum("tu,su,rtv->rsv", Hinv, I, K))
    return -0.5 * np.einsum("rs,rsv->v", Hinv, A)


def phi_hi(bundle: DerivativeBundle, theta,
           tol: TensorTolerance = DEFAULT_TOL) -> np.ndarray:
    """Cheaper field formula valid when the curvature limit equals the
    information matrix: ``phi_t = -sum_{r,s} H^{rs} (K[t,r,s] + J[t,r,s])``."""
    theta = bundle.domain.require_interior(theta)
    H = bundle.eval_H(theta)
    I = bundle.eval_I(theta)
    gap = float(np.max(np.abs(H - I)))
    if gap > tol.threshold(np.max(np.abs(H))):
        raise HNotEqualI(
            f"'{bundle.name}' at {theta}: max |H - I| = {gap:.3e}"
        )
    if not check_spd(H, tol):
        raise SingularCurvature(f"curvature matrix of '{bundle.name}' at {theta}")
    Hinv = np.linalg.inv(H)
    return -np.einsum("rs,trs->t", Hinv, bundle.eval_K(theta) + bundle.eval_J(theta))


def phi_iid(bundle: DerivativeBundle, theta,
            tol: TensorTolerance = DEFAULT_TOL) -> np.ndarray:
    """Field for i.i.d. models from the information matrix alone:
    ``phi_t = sum_{r,s} I^{rs} dI_tr/dtheta_s`` with the derivative taken by
    central differences of ``eval_I``."""
    if not bundle.iid:
        raise ValueError(f"bundle '{bundle.name}' is not flagged i.i.d.")
    theta = bundle.domain.require_interior(theta)
    I = bundle.eval_I(theta)
    if not check_spd(I, tol):
        raise SingularCurvature(f"information matrix of '{bundle.name}' at {theta}")
    Iinv = np.linalg.inv(I)
    dI = fd_matrix_derivative(bundle.eval_I, theta, tol, bundle.domain)
    return np.einsum("rs,trs->t", Iinv, dI)


@dataclass(frozen=True)
class PhiField:
    """A candidate log-prior gradient field with a numeric Jacobian.

    Jacobian symmetry is the existence test, not an assumption: integrable
    fields have symmetric Jacobians and only those admit a potential.
    """

    dim: int
    domain: RectDomain
    fn: Callable[[np.ndarray], np.ndarray]

    def eval(self, theta) -> np.ndarray:
        return np.asarray(self.fn(as_params(theta, self.dim)), dtype=float)

    def jacobian(self, theta, tol: TensorTolerance = DEFAULT_TOL) -> np.ndarray:
        return fd_jacobian(self.eval, theta, tol, self.domain)


def make_phi_field(bundle: DerivativeBundle, method: str = "general",
                   tol: TensorTolerance = DEFAULT_TOL) -> PhiField:
    ops = {"general": phi_general, "hi": phi_hi, "iid": phi_iid}
    if method not in ops:
        raise ValueError(f"unknown phi method '{method}'")
    op = ops[method]
    return PhiField(dim=bundle.dim, domain=bundle.domain,
                    fn=lambda th: op(bundle, th, tol))


@dataclass(frozen=True)
class IntegrabilityReport:
    """Grid-aggregated Jacobian-symmetry audit of a candidate field."""

    points_tested: int
    points_skipped: tuple[tuple[float, ...], ...]
    max_asymmetry: float
    worst_pair: Optional[tuple[int, int]]
    worst_point: Optional[tuple[float, ...]]
    verdict: bool


def integrability_check(phi: PhiField, grid: Sequence,
                        tol: TensorTolerance = DEFAULT_TOL) -> IntegrabilityReport:
    """Test d(phi_t)/d(theta_u) == d(phi_u)/d(theta_t) on every grid point.

    The verdict requires every tested point to pass a tolerance relative to
    its own Jacobian magnitude (field entries span orders of magnitude
    across variance scales).  Points whose stencil leaves the domain are
    skipped and reported.
    """
    grid = list(grid)
    if not grid:
        raise ValueError("grid must contain at least one point")
    tested = 0
    skipped = []
    max_asym = 0.0
    worst_pair = None
    worst_point = None
    verdict = True
    for point in grid:
        point = as_params(point, phi.dim)
        try:
            jac = phi.jacobian(point, tol)
        except DomainViolation:
            skipped.append(tuple(point))
            continue
        tested += 1
        asym = np.abs(jac - jac.T)
        point_max = float(asym.max())
        if point_max > tol.threshold(np.max(np.abs(jac))):
            verdict = False
        if point_max > max_asym:
            max_asym = point_max
            t, u = np.unravel_index(int(np.argmax(asym)), asym.shape)
            worst_pair = (int(t), int(u))
            worst_point = tuple(point)
    if tested == 0:
        verdict = False
    return IntegrabilityReport(points_tested=tested,
                               points_skipped=tuple(skipped),
                               max_asymmetry=max_asym,
                               worst_pair=worst_pair,
                               worst_point=worst_point,
                               verdict=verdict)


@dataclass(frozen=True)
class LogPrior:
    """Unnormalized log prior density (additive constant unspecified).

    ``anchor`` is the base point of the axis-path construction; catalog
    closed forms carry ``anchor=None``.
    """

    fn: Callable[[np.ndarray], float]
    anchor: Optional[np.ndarray] = None

    def eval(self, theta) -> float:
        return float(self.fn(np.asarray(theta, dtype=float)))


def construct_log_prior(phi: PhiField, anchor, quad_tol: float = 1e-8,
                        tol: TensorTolerance = DEFAULT_TOL) -> LogPrior:
    """Build the log prior by integrating the field axis by axis.

    Axis t integrates ``phi_t`` from ``anchor[t]`` to ``theta[t]`` with the
    first t-1 coordinates pinned at the anchor and the trailing ones at
    theta.  Callers are expected to have run :func:`integrability_check`
    on a covering grid; as a guard against a bypassed check, the Jacobian
    is probed at the anchor and a detected asymmetry (local obstruction to
    path independence) raises :class:`NonIntegrable`.
    """
    anchor = as_params(anchor, phi.dim)
    phi.domain.require_interior(anchor, margin=tol.steps(anchor), what="anchor")
    jac = phi.jacobian(anchor, tol)
    asym = float(np.max(np.abs(jac - jac.T)))
    if asym > tol.threshold(np.max(np.abs(jac))):
        raise NonIntegrable(
            f"field Jacobian asymmetric at the anchor (max {asym:.3e}); "
            "no path-independent potential exists"
        )
    p = phi.dim
    per_axis_tol = quad_tol / p

    def evaluate(theta: np.ndarray) -> float:
        theta = phi.domain.require_interior(theta, what="evaluation point")
        total = 0.0
        for t in range(p):
            if theta[t] == anchor[t]:
                continue

            def integrand(z, t=t):
                point = np.concatenate((anchor[:t], [z], theta[t + 1:]))
                return float(phi.eval(point)[t])

            total += adaptive_simpson(integrand, float(anchor[t]),
                                      float(theta[t]), per_axis_tol)
        return total

    return LogPrior(fn=evaluate, anchor=anchor)


def diagonal_integrability_check(bundle: DerivativeBundle, grid: Sequence,
                                 tol: TensorTolerance = DEFAULT_TOL
                                 ) -> IntegrabilityReport:
    """Existence shortcut for i.i.d. models with diagonal information.

    Tests the mixed-partial identity
    ``d^2 log I_tt / d theta_u d theta_t == d^2 log I_uu / d theta_t d theta_u``
    by nested central differences (a four-point mixed stencil on
    ``log I_tt``).  Raises :class:`NotDiagonal` when the information matrix
    carries off-diagonal mass anywhere on the grid.
    """
    grid = list(grid)
    if not grid:
        raise ValueError("grid must contain at least one point")
    # wider outer step: nested differencing amplifies roundoff
    outer = np.sqrt(tol.fd_step)
    tested = 0
    skipped = []
    max_asym = 0.0
    worst_pair = None
    worst_point = None
    verdict = True
    for point in grid:
        point = as_params(point, bundle.dim)
        h = outer * (1.0 + np.abs(point))
        try:
            bundle.domain.require_interior(point, margin=2.0 * h,
                                           what="nested-difference stencil")
        except DomainViolation:
            skipped.append(tuple(point))
            continue
        I = bundle.eval_I(point)
        off = np.max(np.abs(I - np.diag(np.diag(I))))
        if off > tol.threshold(np.max(np.abs(np.diag(I)))):
            raise NotDiagonal(
                f"information matrix of '{bundle.name}' at {point} has "
                f"off-diagonal mass {off:.3e}"
            )
        tested += 1
        p = bundle.dim

        def log_diag(th, t):
            return float(np.log(bundle.eval_I(th)[t, t]))

        for t in range(p):
            for u in range(t + 1, p):
                m_tu = _mixed_partial(lambda th: log_diag(th, t), point, t, u, h)
                m_ut = _mixed_partial(lambda th: log_diag(th, u), point, u, t, h)
                asym = abs(m_tu - m_ut)
                if asym > tol.threshold(max(abs(m_tu), abs(m_ut))):
                    verdict = False
                if asym > max_asym:
                    max_asym = asym
                    worst_pair = (t, u)
                    worst_point = tuple(point)
    if tested == 0:
        verdict = False
    return IntegrabilityReport(points_tested=tested,
                               points_skipped=tuple(skipped),
                               max_asymmetry=max_asym,
                               worst_pair=worst_pair,
                               worst_point=worst_point,
                               verdict=verdict)


def _mixed_partial(g, theta, t, u, h):
    """Four-point stencil for d^2 g / d theta_t d theta_u."""
    pp = theta.copy(); pp[t] += h[t]; pp[u] += h[u]
    pm = theta.copy(); pm[t] += h[t]; pm[u] -= h[u]
    mp = theta.copy(); mp[t] -= h[t]; mp[u] += h[u]
    mm = theta.copy(); mm[t] -= h[t]; mm[u] -= h[u]
    return (g(pp) - g(pm) - g(mp) + g(mm)) / (4.0 * h[t] * h[u])


def firth_decomposition_check(bundle: DerivativeBundle, theta,
                              tol: TensorTolerance = DEFAULT_TOL) -> float:
    """Max residual between the two-term bias-correction split and the field.

    The score-modification term ``-sum I^{rs}(J[t,r,s] + K[t,r,s]/2)`` plus
    the moment-matching term ``-sum I^{rs} K[t,r,s]/2`` must reproduce the
    i.i.d. field componentwise; both sides are evaluated independently.
    """
    if not bundle.iid:
        raise ValueError(f"bundle '{bundle.name}' is not flagged i.i.d.")
    theta = bundle.domain.require_interior(theta)
    I = bundle.eval_I(theta)
    if not check_spd(I, tol):
        raise SingularCurvature(f"information matrix of '{bundle.name}' at {theta}")
    Iinv = np.linalg.inv(I)
    J = bundle.eval_J(theta)
    K = bundle.eval_K(theta)
    score_mod = -np.einsum("rs,trs->t", Iinv, J + 0.5 * K)
    moment_match = -0.5 * np.einsum("rs,trs->t", Iinv, K)
    return float(np.max(np.abs(score_mod + moment_match - phi_iid(bundle, theta, tol))))
