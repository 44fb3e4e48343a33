"""Polygamma helpers: trigamma and its derivative.

Computed by the upward recurrence into the asymptotic-series regime; keeps
the core library free of special-function dependencies.  Absolute accuracy
is ~1e-12 for positive arguments (checked against an independent
implementation in the test suite).
"""

from __future__ import annotations

import numpy as np

_SHIFT = 8.0

# Bernoulli-number coefficients of the asymptotic tail of psi'(x).
_TRI_COEFFS = (1.0 / 6, -1.0 / 30, 1.0 / 42, -1.0 / 30, 5.0 / 66, -691.0 / 2730, 7.0 / 6)


def trigamma(x):
    """psi'(x) for x > 0, elementwise."""
    x = np.asarray(x, dtype=float)
    if np.any(x <= 0):
        raise ValueError("trigamma requires x > 0")
    scalar = x.ndim == 0
    x = np.atleast_1d(x).copy()
    acc = np.zeros_like(x)
    # recurrence psi'(x) = psi'(x + 1) + 1/x^2, applied until x >= _SHIFT
    while np.any(x < _SHIFT):
        mask = x < _SHIFT
        acc[mask] += 1.0 / x[mask] ** 2
        x[mask] += 1.0
    inv2 = 1.0 / (x * x)
    tail = np.zeros_like(x)
    power = inv2 / x  # x^{-3}
    for c in _TRI_COEFFS:
        tail += c * power
        power *= inv2
    out = acc + 1.0 / x + 0.5 * inv2 + tail
    return float(out[0]) if scalar else out


def trigamma_deriv(x):
    """psi''(x) for x > 0, elementwise (derivative of :func:`trigamma`)."""
    x = np.asarray(x, dtype=float)
    if np.any(x <= 0):
        raise ValueError("trigamma_deriv requires x > 0")
    scalar = x.ndim == 0
    x = np.atleast_1d(x).copy()
    acc = np.zeros_like(x)
    # recurrence psi''(x) = psi''(x + 1) - 2/x^3
    while np.any(x < _SHIFT):
        mask = x < _SHIFT
        acc[mask] -= 2.0 / x[mask] ** 3
        x[mask] += 1.0
    inv = 1.0 / x
    inv2 = inv * inv
    tail = np.zeros_like(x)
    power = inv2 * inv2  # x^{-4}, differentiated leading Bernoulli term
    # term-by-term derivative of the trigamma tail
    for k, c in enumerate(_TRI_COEFFS):
        tail += -(2 * k + 3) * c * power
        power *= inv2
    out = acc - inv2 - inv2 * inv + tail
    return float(out[0]) if scalar else out
