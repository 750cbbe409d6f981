"""Classification losses on the probability assigned to the true outcome.

Three variants share the same signature: plain cross entropy, focal loss
with a fixed focusing exponent, and a focal variant whose exponent adapts
to the prediction itself (large for confident mistakes, shrinking toward
1 as the prediction improves).  All of them accept a scalar or a numpy
array of probabilities in (0, 1] and return the loss with the same shape.

The adaptive variant crosses the fixed gamma=2 curve exactly once, at
p = 1 - ln 2, where its exponent passes through 2.
"""

from __future__ import annotations

import math

import numpy as np

PROB_FLOOR = 1e-12
PROB_CEIL = 1.0 - 1e-12


def _as_prob(p):
    """Validate p and return (array, was_scalar)."""
    arr = np.asarray(p, dtype=float)
    if arr.size and (np.any(~np.isfinite(arr)) or np.any(arr <= 0.0) or np.any(arr > 1.0)):
        raise ValueError("probability must lie in (0, 1]")
    return arr, np.isscalar(p) or arr.ndim == 0


def _ret(arr, scalar):
    return float(arr) if scalar else arr


def clamp_probability(p):
    """Clip probabilities into [1e-12, 1 - 1e-12].

    Unlike the loss functions this accepts any finite value, so it can
    sit directly after a sigmoid without the caller worrying about
    saturation at 0 or 1.
    """
    arr = np.asarray(p, dtype=float)
    if arr.size and np.any(~np.isfinite(arr)):
        raise ValueError("probability must be finite")
    out = np.clip(arr, PROB_FLOOR, PROB_CEIL)
    return _ret(out, np.isscalar(p) or arr.ndim == 0)


def cross_entropy(p):
    """-log(p)."""
    arr, scalar = _as_prob(p)
    return _ret(-np.log(arr), scalar)


def focal_loss(p, gamma: float = 2.0):
    """-(1 - p)^gamma * log(p) with a fixed focusing exponent.

    gamma = 0 recovers plain cross entropy.
    """
    if not (isinstance(gamma, (int, float)) and math.isfinite(gamma)) or gamma < 0:
        raise ValueError("gamma must be a finite non-negative number")
    arr, scalar = _as_prob(p)
    return _ret(-np.power(1.0 - arr, gamma) * np.log(arr), scalar)


def focal_loss_exp(p):
    """-(1 - p)^G * log(p) with an adaptive exponent G = exp(1 - p).

    The exponent ranges from e (at p near 0) down to 1 (at p = 1), so
    easy examples are damped harder than fixed-gamma focal loss while
    hard examples stay closer to cross entropy.
    """
    arr, scalar = _as_prob(p)
    u = 1.0 - arr
    out = -np.power(u, np.exp(u)) * np.log(arr)
    return _ret(out, scalar)


def focal_loss_exp_grad(p):
    """Derivative of focal_loss_exp with respect to p.

    Derived by differentiating u^G * log(p) with u = 1 - p and G = e^u,
    using d(u^G)/dp = -u^G * G * (log(u) + 1/u).  The loss is strictly
    decreasing, so the result is negative everywhere except at p = 1,
    where the analytic limit is 0.
    """
    arr, scalar = _as_prob(p)
    flat = np.atleast_1d(arr).astype(float)
    u = 1.0 - flat
    out = np.zeros_like(flat)
    interior = u > 0.0
    ui, pi = u[interior], flat[interior]
    g = np.power(ui, np.exp(ui))
    gamma = np.exp(ui)
    out[interior] = g * gamma * (np.log(ui) + 1.0 / ui) * np.log(pi) - g / pi
    out = out.reshape(arr.shape)
    return _ret(out, scalar)
