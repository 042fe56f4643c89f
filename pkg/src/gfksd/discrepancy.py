"""Gradient-free KSD of weighted particle measures.

For a particle measure pi = sum_i w_i delta(x_i),

    D_{p,q}(pi)^2 = sum_ij w_i w_j r(x_i) r(x_j) k_q(x_i, x_j),   r = q / p.

Ratios are only ever formed as exponentials of log-density differences.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg, special

from .density.models import LinearPushforward, as_points, log_density_ratio
from .errors import (
    DefinitenessError,
    DegenerateError,
    DimensionMismatchError,
    EvaluationError,
    GfksdError,
    NumericalError,
    PreconditionError,
)
from .kernel import ImqKernel, stein_matrix


@dataclass
class ParticleMeasure:
    """Points ``(n, d)`` with simplex weights ``(n,)``."""

    points: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim == 1:
            pts = pts[:, None]
        w = np.asarray(self.weights, dtype=float).reshape(-1)
        if pts.shape[0] < 1:
            raise PreconditionError("a particle measure needs at least one point")
        if w.shape[0] != pts.shape[0]:
            raise DimensionMismatchError("one weight per point is required")
        if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-10:
            raise PreconditionError("weights must be nonnegative and sum to one")
        self.points = pts
        self.weights = w

    @classmethod
    def uniform(cls, points):
        pts = np.asarray(points, dtype=float)
        if pts.ndim == 1:
            pts = pts[:, None]
        n = pts.shape[0]
        return cls(pts, np.full(n, 1.0 / n))

    @property
    def n(self):
        return self.points.shape[0]

    @property
    def dim(self):
        return self.points.shape[1]

    def mean(self):
        return self.weights @ self.points

    def to_csv(self, path):
        """Write columns ``x1..xd, weight`` with a header row."""
        header = ",".join([f"x{i + 1}" for i in range(self.dim)] + ["weight"])
        data = np.column_stack([self.points, self.weights])
        np.savetxt(path, data, delimiter=",", header=header, comments="", fmt="%.17g")

    @classmethod
    def from_csv(cls, path):
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        return cls(data[:, :-1], data[:, -1])


@dataclass
class GfksdResult:
    value_squared: float
    value: float
    n: int
    max_log_ratio: float
    min_log_ratio: float
    extra: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            "value": self.value,
            "value_squared": self.value_squared,
            "n": self.n,
            "max_log_ratio": self.max_log_ratio,
            "min_log_ratio": self.min_log_ratio,
        }

    def to_json(self):
        return json.dumps(self.to_dict())


def _log_ratios(p, q, points):
    lr = np.atleast_1d(log_density_ratio(q, p, points))
    bad = np.flatnonzero(~np.isfinite(lr))
    if bad.size:
        i = int(bad[0])
        raise EvaluationError(f"non-finite log q/p ratio at point index {i}", index=i)
    return lr


def _finish(total, abs_total, log_scale, n, lr):
    # total is the double sum on the rescaled problem; log_scale restores it.
    if total < 0:
        if total < -1e-10 * max(abs_total, 1e-300):
            raise GfksdError(
                f"squared discrepancy is negative beyond tolerance ({total:.3e}); "
                "Stein matrix is not positive semidefinite"
            )
        total = 0.0
    value_sq = total * math.exp(log_scale) if total > 0 else 0.0
    return GfksdResult(
        value_squared=value_sq,
        value=math.sqrt(value_sq),
        n=n,
        max_log_ratio=float(lr.max()),
        min_log_ratio=float(lr.min()),
    )


def weighted_quadratic_form(K, v):
    """Compensated row-major sum of ``v_i v_j K_ij``; returns ``(sum, sum |.|)``."""
    terms = (v[:, None] * v[None, :]) * K
    return math.fsum(terms.ravel()), float(np.abs(terms).sum())


def gfksd_squared(p, q, kernel, pi):
    """Squared gradient-free KSD of ``pi`` with target ``p`` and score-model ``q``.

    ``p`` may be unnormalised; only ``q`` needs a score.
    """
    kernel = kernel or ImqKernel()
    x = pi.points
    if x.shape[1] != q.dim or p.dim != q.dim:
        raise DimensionMismatchError("particle dimension does not match the densities")
    lr = _log_ratios(p, q, x)
    shift = float(lr.max())
    v = pi.weights * np.exp(lr - shift)
    K = stein_matrix(kernel, x, q.score(x))
    total, abs_total = weighted_quadratic_form(K, v)
    return _finish(total, abs_total, 2.0 * shift, pi.n, lr)


def gfksd_via_reparam(p, q, kernel, pi):
    """Same quantity via D_{p,q}(pi) = Z D_{q,q}(pi_bar).

    ``Z = sum_i w_i (q/p)(x_i)`` and ``pi_bar`` reweights ``pi`` by ``(q/p) / Z``.
    """
    kernel = kernel or ImqKernel()
    x = pi.points
    lr = _log_ratios(p, q, x)
    with np.errstate(divide="ignore"):
        log_terms = np.log(pi.weights) + lr
    log_z = float(special.logsumexp(log_terms))
    if not np.isfinite(log_z):
        raise DegenerateError("normaliser Z is zero")
    w_bar = np.exp(log_terms - log_z)
    w_bar /= w_bar.sum()
    K = stein_matrix(kernel, x, q.score(x))
    canonical, abs_total = weighted_quadratic_form(K, w_bar)
    res = _finish(canonical, abs_total, 2.0 * log_z, pi.n, lr)
    res.extra["log_Z"] = log_z
    res.extra["reweighted"] = w_bar
    return res


# -- standardisation ------------------------------------------------------------

@dataclass
class Standardization:
    """The linear map ``z = M^{-1} x`` and its companion density transform.

    By default ``M = C`` (the covariance of q), i.e. ``x -> C^{-1} x``.  With
    ``whiten=True``, ``M`` is the Cholesky factor of ``C`` instead.
    """

    matrix: np.ndarray
    points: np.ndarray

    def forward(self, x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        return linalg.solve(self.matrix, x.T).T

    def inverse(self, z):
        z = np.atleast_2d(np.asarray(z, dtype=float))
        return z @ self.matrix.T

    def density(self, model):
        """Pushforward of ``model`` into standardised coordinates."""
        return LinearPushforward(model, self.matrix)


def standardize(target_cov, points, whiten=False):
    """Map ``points`` through ``x -> C^{-1} x`` (or ``L^{-1} x`` if ``whiten``).

    Returns a :class:`Standardization` carrying the mapped points and a
    ``density`` method that transforms p and q consistently.
    """
    C = np.atleast_2d(np.asarray(target_cov, dtype=float))
    try:
        L = linalg.cholesky(C, lower=True)
    except linalg.LinAlgError as exc:
        raise DefinitenessError("covariance is not symmetric positive definite") from exc
    M = L if whiten else C
    pts, _ = as_points(points, C.shape[0])
    std = Standardization(matrix=M, points=np.empty(0))
    std.points = std.forward(pts)
    return std


# -- quasi Monte Carlo discretisation -------------------------------------------

def inverse_cdf(density, u, tol=1e-10, max_iter=400):
    """Invert a one-dimensional CDF by bisection, elementwise on ``u``."""
    u = np.asarray(u, dtype=float)
    lo = np.full(u.shape, -1.0)
    hi = np.full(u.shape, 1.0)
    for _ in range(200):
        grow = density.cdf(lo) > u
        if not grow.any():
            break
        lo = np.where(grow, 2.0 * lo, lo)
    for _ in range(200):
        grow = density.cdf(hi) < u
        if not grow.any():
            break
        hi = np.where(grow, 2.0 * hi, hi)
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        below = density.cdf(mid) < u
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
        if np.all(hi - lo <= 1e-15 * np.maximum(1.0, np.abs(mid))):
            break
    x = 0.5 * (lo + hi)
    err = np.abs(density.cdf(x) - u)
    if np.any(err > tol) or not np.all(np.isfinite(x)):
        raise NumericalError(f"CDF inversion failed to reach tolerance {tol} (error {err.max():.2e})")
    return x


def qmc_particles_1d(density, m):
    """Equal-weight particles at the inverse-CDF images of ``(i - 1/2) / m``."""
    if density.dim != 1:
        raise DimensionMismatchError("qmc_particles_1d needs a one-dimensional density")
    if m < 1:
        raise PreconditionError("m must be positive")
    u = (np.arange(1, m + 1) - 0.5) / m
    return ParticleMeasure.uniform(inverse_cdf(density, u)[:, None])
