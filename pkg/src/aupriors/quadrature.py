"""Adaptive Simpson quadrature for the prior-construction line integrals.

Integrands here are smooth rational functions on interior segments of the
parameter rectangle, so plain Simpson with the Richardson acceptance test
and a bounded recursion depth (2^16 subintervals per segment) is enough.
"""

from __future__ import annotations

from .errors import QuadratureFailure

MAX_DEPTH = 16  # 2**16 subdivisions per axis segment


def adaptive_simpson(f, a: float, b: float, abs_tol: float) -> float:
    """Integrate f over [a, b] to absolute error <= abs_tol.

    Handles a == b (returns 0) and reversed limits.  Raises
    :class:`QuadratureFailure` when the subdivision budget runs out.
    """
    if abs_tol <= 0:
        raise ValueError("abs_tol must be positive")
    if a == b:
        return 0.0
    sign = 1.0
    if b < a:
        a, b = b, a
        sign = -1.0
    fa, fb = f(a), f(b)
    m = 0.5 * (a + b)
    fm = f(m)
    whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    return sign * _simpson_rec(f, a, b, fa, fm, fb, whole, abs_tol, MAX_DEPTH)


def _simpson_rec(f, a, b, fa, fm, fb, whole, tol, depth):
    m = 0.5 * (a + b)
    lm = 0.5 * (a + m)
    rm = 0.5 * (m + b)
    flm, frm = f(lm), f(rm)
    left = (m - a) / 6.0 * (fa + 4.0 * flm + fm)
    right = (b - m) / 6.0 * (fm + 4.0 * frm + fb)
    delta = left + right - whole
    if abs(delta) <= 15.0 * tol:
        return left + right + delta / 15.0
    if depth <= 0:
        raise QuadratureFailure(
            f"subdivision budget exhausted on [{a}, {b}] (residual {abs(delta):.3e})"
        )
    half = 0.5 * tol
    return (_simpson_rec(f, a, m, fa, flm, fm, left, half, depth - 1)
            + _simpson_rec(f, m, b, fm, frm, fb, right, half, depth - 1))
