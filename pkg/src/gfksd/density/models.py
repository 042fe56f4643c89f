"""Density models with log-density, score and (where available) sampling and CDF.

All models accept either a single point of shape ``(d,)`` (a scalar is allowed
when ``d == 1``) or a batch of shape ``(n, d)``; single points give scalar /
``(d,)`` outputs, batches give ``(n,)`` / ``(n, d)`` outputs.
"""

from __future__ import annotations

import numpy as np
from scipy import linalg, special

from ..errors import (
    DefinitenessError,
    DimensionMismatchError,
    PreconditionError,
    UnsupportedOperationError,
)

_LOG_2PI = np.log(2.0 * np.pi)


def as_points(x, dim):
    """Coerce ``x`` to an ``(n, dim)`` float array.

    Returns the array and a flag telling whether a single point was passed.
    """
    x = np.asarray(x, dtype=float)
    if x.ndim == 0:
        x = x.reshape(1)
    single = x.ndim == 1
    pts = np.atleast_2d(x)
    if pts.ndim != 2 or pts.shape[-1] != dim:
        raise DimensionMismatchError(
            f"expected points with last dimension {dim}, got shape {np.shape(x)}"
        )
    return pts, single


class DensityModel:
    """Base class: an (optionally unnormalised) log-density on R^d.

    Subclasses implement ``_log_density`` and, when they can, ``_score`` on
    ``(n, d)`` batches.
    """

    kind = "custom"
    normalized = False

    def __init__(self, dim):
        if int(dim) < 1:
            raise PreconditionError("dimension must be a positive integer")
        self.dim = int(dim)

    # -- public API -------------------------------------------------------
    def log_density(self, x):
        pts, single = as_points(x, self.dim)
        out = np.asarray(self._log_density(pts), dtype=float)
        return float(out[0]) if single else out

    def score(self, x):
        if not self.has_score:
            raise UnsupportedOperationError(f"{type(self).__name__} has no score function")
        pts, single = as_points(x, self.dim)
        out = np.asarray(self._score(pts), dtype=float).reshape(pts.shape)
        return out[0] if single else out

    @property
    def has_score(self):
        return True

    def sample(self, rng, n):
        raise UnsupportedOperationError(f"{type(self).__name__} does not support sampling")

    def cdf(self, x):
        """CDF of a one-dimensional model, evaluated elementwise on ``x``."""
        raise UnsupportedOperationError(f"{type(self).__name__} has no CDF")

    # -- hooks ------------------------------------------------------------
    def _log_density(self, pts):
        raise NotImplementedError

    def _score(self, pts):
        raise NotImplementedError

    def _require_1d(self):
        if self.dim != 1:
            raise UnsupportedOperationError("CDF only available in one dimension")


class GaussianDensity(DensityModel):
    """Multivariate normal N(mean, covariance) with a cached Cholesky factor."""

    kind = "gaussian"
    normalized = True

    def __init__(self, mean, covariance, info=None):
        mean = np.atleast_1d(np.asarray(mean, dtype=float))
        d = mean.shape[0]
        cov = np.asarray(covariance, dtype=float)
        if cov.ndim == 0:
            cov = cov * np.eye(d)
        elif cov.ndim == 1:
            cov = np.diag(cov)
        if cov.shape != (d, d):
            raise DimensionMismatchError(f"covariance shape {cov.shape} does not match mean ({d},)")
        if not np.allclose(cov, cov.T, rtol=1e-10, atol=1e-14):
            raise PreconditionError("covariance must be symmetric")
        super().__init__(d)
        self.mean = mean
        self.covariance = 0.5 * (cov + cov.T)
        try:
            self._chol = linalg.cholesky(self.covariance, lower=True)
        except linalg.LinAlgError as exc:
            raise DefinitenessError("covariance is not positive definite") from exc
        self._log_norm = np.sum(np.log(np.diag(self._chol))) + 0.5 * d * _LOG_2PI
        # free-form diagnostics from whoever built the model (e.g. fit_laplace)
        self.info = dict(info or {})

    @property
    def cholesky(self):
        return self._chol

    def _log_density(self, pts):
        z = linalg.solve_triangular(self._chol, (pts - self.mean).T, lower=True)
        return -0.5 * np.sum(z * z, axis=0) - self._log_norm

    def _score(self, pts):
        return -linalg.cho_solve((self._chol, True), (pts - self.mean).T).T

    def sample(self, rng, n):
        z = rng.standard_normal((int(n), self.dim))
        return self.mean + z @ self._chol.T

    def cdf(self, x):
        self._require_1d()
        return special.ndtr((np.asarray(x, dtype=float) - self.mean[0]) / self._chol[0, 0])

    def __repr__(self):
        return f"GaussianDensity(mean={self.mean!r}, covariance={self.covariance!r})"


class StudentTDensity(DensityModel):
    """Product of independent location-scale Student-t densities.

    With a scalar ``loc`` this is the usual univariate Student-t(df, loc, scale).
    """

    kind = "student_t"
    normalized = True

    def __init__(self, df, loc=0.0, scale=1.0):
        loc = np.atleast_1d(np.asarray(loc, dtype=float))
        scale = np.broadcast_to(np.asarray(scale, dtype=float), loc.shape).copy()
        if df <= 0 or np.any(scale <= 0):
            raise PreconditionError("df and scale must be positive")
        super().__init__(loc.shape[0])
        self.df = float(df)
        self.loc = loc
        self.scale = scale
        nu = self.df
        self._log_c = (
            special.gammaln(0.5 * (nu + 1)) - special.gammaln(0.5 * nu) - 0.5 * np.log(nu * np.pi)
        )

    def _log_density(self, pts):
        z = (pts - self.loc) / self.scale
        nu = self.df
        terms = self._log_c - np.log(self.scale) - 0.5 * (nu + 1) * np.log1p(z * z / nu)
        return np.sum(terms, axis=1)

    def _score(self, pts):
        r = pts - self.loc
        nu = self.df
        return -(nu + 1) * r / (nu * self.scale**2 + r * r)

    def sample(self, rng, n):
        return self.loc + self.scale * rng.standard_t(self.df, size=(int(n), self.dim))

    def cdf(self, x):
        self._require_1d()
        z = (np.asarray(x, dtype=float) - self.loc[0]) / self.scale[0]
        return special.stdtr(self.df, z)


class MixtureDensity(DensityModel):
    """Finite mixture sum_k w_k p_k(x), evaluated in the log domain."""

    kind = "mixture"
    normalized = True

    def __init__(self, weights, components, info=None):
        weights = np.asarray(weights, dtype=float)
        components = list(components)
        if len(components) == 0 or weights.shape != (len(components),):
            raise PreconditionError("need one weight per component")
        if np.any(weights < 0) or abs(weights.sum() - 1.0) > 1e-12:
            raise PreconditionError("mixture weights must be nonnegative and sum to 1")
        dims = {c.dim for c in components}
        if len(dims) != 1:
            raise DimensionMismatchError("mixture components have different dimensions")
        super().__init__(dims.pop())
        self.weights = weights / weights.sum()
        self.components = components
        with np.errstate(divide="ignore"):
            self._log_w = np.log(self.weights)
        self.normalized = all(c.normalized for c in components)
        self.info = dict(info or {})

    @property
    def has_score(self):
        return all(c.has_score for c in self.components)

    def _component_logs(self, pts):
        return np.stack([lw + c._log_density(pts) for lw, c in zip(self._log_w, self.components)])

    def _log_density(self, pts):
        return special.logsumexp(self._component_logs(pts), axis=0)

    def _score(self, pts):
        logs = self._component_logs(pts)
        resp = np.exp(logs - special.logsumexp(logs, axis=0))
        out = np.zeros_like(pts)
        for r, c in zip(resp, self.components):
            out += r[:, None] * c._score(pts)
        return out

    def sample(self, rng, n):
        n = int(n)
        counts = rng.multinomial(n, self.weights)
        draws = [c.sample(rng, m) for c, m in zip(self.components, counts) if m > 0]
        x = np.concatenate(draws, axis=0)
        return x[rng.permutation(n)]

    def cdf(self, x):
        self._require_1d()
        return sum(w * c.cdf(x) for w, c in zip(self.weights, self.components))

    def __repr__(self):
        return f"MixtureDensity(weights={self.weights!r}, components={self.components!r})"


class KdeDensity(DensityModel):
    """Gaussian kernel density estimate.

    The kernel is ``exp(-(x - y)^2 / l^2)`` per coordinate, i.e. a normal with
    standard deviation ``l / sqrt(2)``, where ``l`` is ``bandwidth``.
    """

    kind = "kde"
    normalized = True

    def __init__(self, points, bandwidth):
        points = np.asarray(points, dtype=float)
        if points.ndim == 1:
            points = points[:, None]
        n, d = points.shape
        bw = np.broadcast_to(np.asarray(bandwidth, dtype=float), (d,)).copy()
        if np.any(bw <= 0):
            raise PreconditionError("bandwidth must be positive")
        super().__init__(d)
        self.points = points
        self.bandwidth = bw
        self.kernel_std = bw / np.sqrt(2.0)
        self._log_norm = np.log(n) + np.sum(np.log(self.kernel_std)) + 0.5 * d * _LOG_2PI

    def _log_kernel(self, pts):
        z = (pts[:, None, :] - self.points[None, :, :]) / self.kernel_std
        return -0.5 * np.sum(z * z, axis=2)

    def _log_density(self, pts):
        return special.logsumexp(self._log_kernel(pts), axis=1) - self._log_norm

    def _score(self, pts):
        lk = self._log_kernel(pts)
        resp = np.exp(lk - special.logsumexp(lk, axis=1, keepdims=True))
        diff = pts[:, None, :] - self.points[None, :, :]
        return -np.einsum("ij,ijk->ik", resp, diff) / self.kernel_std**2

    def sample(self, rng, n):
        idx = rng.integers(0, self.points.shape[0], size=int(n))
        return self.points[idx] + rng.standard_normal((int(n), self.dim)) * self.kernel_std

    def cdf(self, x):
        self._require_1d()
        x = np.asarray(x, dtype=float)
        z = (x[..., None] - self.points[:, 0]) / self.kernel_std[0]
        return special.ndtr(z).mean(axis=-1)


class CustomDensity(DensityModel):
    """Wrap user callables as a density model.

    ``log_density`` and ``score`` are called on single points of shape ``(d,)``
    unless ``vectorized=True``, in which case they receive ``(n, d)`` batches.
    """

    def __init__(self, log_density, dim, score=None, *, vectorized=False, normalized=False,
                 kind="custom", info=None):
        super().__init__(dim)
        self._logf = log_density
        self._scoref = score
        self._vectorized = vectorized
        self.normalized = normalized
        self.kind = kind
        self.info = dict(info or {})

    @property
    def has_score(self):
        return self._scoref is not None

    def _log_density(self, pts):
        if self._vectorized:
            return self._logf(pts)
        return np.array([self._logf(p) for p in pts], dtype=float)

    def _score(self, pts):
        if self._vectorized:
            return self._scoref(pts)
        return np.array([self._scoref(p) for p in pts], dtype=float)


class TemperedDensity(DensityModel):
    """Geometric interpolation ``eps * log p0 + (1 - eps) * log p`` (unnormalised)."""

    kind = "custom"

    def __init__(self, base, target, eps):
        if base.dim != target.dim:
            raise DimensionMismatchError("tempering endpoints must share a dimension")
        if not 0.0 <= eps <= 1.0:
            raise PreconditionError("tempering weight must lie in [0, 1]")
        super().__init__(target.dim)
        self.base = base
        self.target = target
        self.eps = float(eps)

    @property
    def has_score(self):
        return (self.eps == 1.0 or self.target.has_score) and (self.eps == 0.0 or self.base.has_score)

    def _log_density(self, pts):
        if self.eps == 0.0:
            return self.target._log_density(pts)
        if self.eps == 1.0:
            return self.base._log_density(pts)
        return self.eps * self.base._log_density(pts) + (1.0 - self.eps) * self.target._log_density(pts)

    def _score(self, pts):
        if self.eps == 0.0:
            return self.target._score(pts)
        if self.eps == 1.0:
            return self.base._score(pts)
        return self.eps * self.base._score(pts) + (1.0 - self.eps) * self.target._score(pts)


class LinearPushforward(DensityModel):
    """Density of ``z = M^{-1} x`` when ``x`` has density ``base``.

    ``log p_z(z) = log p_x(M z) + log|det M|`` and ``score_z(z) = M^T score_x(M z)``.
    Sampling and (1D) CDF are inherited from the base model.
    """

    def __init__(self, base, matrix):
        matrix = np.atleast_2d(np.asarray(matrix, dtype=float))
        if matrix.shape != (base.dim, base.dim):
            raise DimensionMismatchError("map matrix must be d x d")
        super().__init__(base.dim)
        self.base = base
        self.matrix = matrix
        self.kind = base.kind
        self.normalized = base.normalized
        sign, logdet = np.linalg.slogdet(matrix)
        if sign == 0:
            raise DimensionMismatchError("map matrix is singular")
        self._logdet = logdet
        self._lu = linalg.lu_factor(matrix)

    @property
    def has_score(self):
        return self.base.has_score

    def _to_base(self, pts):
        return pts @ self.matrix.T

    def _log_density(self, pts):
        return self.base._log_density(self._to_base(pts)) + self._logdet

    def _score(self, pts):
        return self.base._score(self._to_base(pts)) @ self.matrix

    def sample(self, rng, n):
        return linalg.lu_solve(self._lu, self.base.sample(rng, n).T).T

    def cdf(self, x):
        self._require_1d()
        m = self.matrix[0, 0]
        x = np.asarray(x, dtype=float)
        c = self.base.cdf(m * x)
        return c if m > 0 else 1.0 - c


def log_density_ratio(q, p, x):
    """``log q(x) - log p(x)`` for a point or a batch.

    A result of ``+inf`` signals ``p(x) = 0 < q(x)``; callers decide how to
    handle it.  For unnormalised ``p`` the ratio is known up to a constant.
    """
    if q.dim != p.dim:
        raise DimensionMismatchError(f"q has dimension {q.dim} but p has {p.dim}")
    with np.errstate(invalid="ignore"):
        return np.subtract(q.log_density(x), p.log_density(x))


def score(model, x):
    """Gradient of ``model``'s log-density at ``x``."""
    return model.score(x)


def finite_difference_score(log_density, x, step=1e-5):
    """Central-difference gradient of a scalar log-density at a single point.

    The step for coordinate ``i`` is ``step * (1 + |x_i|)``.
    """
    x = np.asarray(x, dtype=float)
    g = np.empty_like(x)
    for i in range(x.size):
        h = step * (1.0 + abs(x[i]))
        e = np.zeros_like(x)
        e[i] = h
        g[i] = (log_density(x + e) - log_density(x - e)) / (2.0 * h)
    return g
