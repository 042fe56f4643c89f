"""Inverse multi-quadric kernel, its derivatives, and the Stein kernel k_q.

    k(x, y) = (sigma^2 + |x - y|^2)^(-beta),   sigma > 0, 0 < beta < 1

and, for a score function s = grad log q,

    k_q(x, y) = div_x div_y k + <grad_x k, s(y)> + <grad_y k, s(x)> + k <s(x), s(y)>.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatchError, PreconditionError


@dataclass(frozen=True)
class ImqKernel:
    """Inverse multi-quadric kernel parameters (defaults sigma=1, beta=1/2)."""

    sigma: float = 1.0
    beta: float = 0.5

    def __post_init__(self):
        if not self.sigma > 0:
            raise PreconditionError("sigma must be positive")
        if not 0.0 < self.beta < 1.0:
            raise PreconditionError("beta must lie strictly inside (0, 1)")

    def diagonal(self, d, score_sq_norm=0.0):
        """k_q(x, x) = 2 beta d sigma^(-2(beta+1)) + sigma^(-2 beta) |s(x)|^2."""
        s2, b = self.sigma**2, self.beta
        return 2.0 * b * d * s2 ** (-(b + 1.0)) + s2 ** (-b) * np.asarray(score_sq_norm)


@dataclass(frozen=True)
class SteinKernelEval:
    """Value of k_q(x, y) together with its four summands.

    ``components`` is ``(div_grad, <grad_x k, s(y)>, <grad_y k, s(x)>, k <s(x), s(y)>)``.
    """

    value: float
    components: tuple


def _check_pair(x, y):
    x = np.atleast_1d(np.asarray(x, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=float))
    if x.shape != y.shape or x.ndim != 1:
        raise DimensionMismatchError(f"point shapes differ: {x.shape} vs {y.shape}")
    return x, y


def _stein_terms(diff, sx, sy, sigma, beta):
    # Shared by stein_kernel and stein_matrix so both evaluate identical
    # floating-point expressions; reductions run over the last axis only.
    # Returns the four summands plus the value.  The two cross terms enter
    # the value as g <x - y, s(x) - s(y)>, which is bitwise invariant under
    # swapping (x, s(x)) and (y, s(y)).
    d = diff.shape[-1]
    r2 = np.sum(diff * diff, axis=-1)
    base = sigma * sigma + r2
    k = base ** (-beta)
    g = 2.0 * beta * base ** (-beta - 1.0)
    div_grad = -4.0 * beta * (beta + 1.0) * r2 * base ** (-beta - 2.0) + d * g
    t_xy = -g * np.sum(diff * sy, axis=-1)
    t_yx = g * np.sum(diff * sx, axis=-1)
    t_ss = k * np.sum(sx * sy, axis=-1)
    cross = g * np.sum(diff * (sx - sy), axis=-1)
    return (div_grad, t_xy, t_yx, t_ss), (div_grad + cross) + t_ss


def k(kernel, x, y):
    """Kernel value (sigma^2 + |x - y|^2)^(-beta)."""
    x, y = _check_pair(x, y)
    diff = x - y
    return float((kernel.sigma**2 + diff @ diff) ** (-kernel.beta))


def k_derivatives(kernel, x, y):
    """Closed-form ``grad_x k``, ``grad_y k`` and ``div_x . grad_y k``.

    Returns a dict with keys ``grad_x``, ``grad_y``, ``div_grad``.
    """
    x, y = _check_pair(x, y)
    b = kernel.beta
    diff = x - y
    r2 = diff @ diff
    base = kernel.sigma**2 + r2
    g = 2.0 * b * base ** (-b - 1.0)
    div_grad = -4.0 * b * (b + 1.0) * r2 * base ** (-b - 2.0) + x.size * g
    return {"grad_x": -g * diff, "grad_y": g * diff, "div_grad": float(div_grad)}


def stein_kernel(kernel, x, y, score_x, score_y):
    """Evaluate k_q(x, y) for given scores s(x), s(y) of q."""
    x, y = _check_pair(x, y)
    sx, sy = _check_pair(score_x, score_y)
    if sx.shape != x.shape:
        raise DimensionMismatchError("scores must have the same dimension as points")
    # batch of one, so the arithmetic is the same array code path as stein_matrix
    terms, value = _stein_terms((x - y)[None], sx[None], sy[None], kernel.sigma, kernel.beta)
    return SteinKernelEval(value=float(value[0]), components=tuple(float(t[0]) for t in terms))


def stein_matrix(kernel, points, scores):
    """Symmetric matrix K[i, j] = k_q(x_i, x_j).

    Only the upper triangle is evaluated and then mirrored.
    """
    x = np.asarray(points, dtype=float)
    s = np.asarray(scores, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    if s.ndim == 1:
        s = s[:, None]
    if x.shape != s.shape:
        raise DimensionMismatchError(f"points {x.shape} and scores {s.shape} differ in shape")
    n = x.shape[0]
    iu, ju = np.triu_indices(n)
    _, vals = _stein_terms(x[iu] - x[ju], s[iu], s[ju], kernel.sigma, kernel.beta)
    out = np.empty((n, n))
    out[iu, ju] = vals
    out[ju, iu] = vals
    return out
