"""Stochastic-gradient variational inference with the gradient-free KSD.

The variational family is the pushforward of a reference R through a
diagonal affine map T(x) = shift + exp(log_scale) * x.  Gradients of
D_{p,q}(pi_theta)^2 are U-statistics over pairs i != j of
grad_theta u(T(x_i), T(x_j)), where

    u(x, y) = (q/p)(x) (q/p)(y) k_q(x, y).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .density.models import GaussianDensity, TemperedDensity, as_points
from .errors import DimensionMismatchError, DivergenceError, EvaluationError, PreconditionError
from .kernel import ImqKernel, stein_kernel, stein_matrix
from .sampling import make_rng


@dataclass
class AffineTransport:
    """Diagonal affine map parametrised by ``theta = (log_scale, shift)``."""

    log_scale: np.ndarray
    shift: np.ndarray

    def __post_init__(self):
        self.log_scale = np.atleast_1d(np.asarray(self.log_scale, dtype=float)).copy()
        self.shift = np.atleast_1d(np.asarray(self.shift, dtype=float)).copy()
        if self.log_scale.shape != self.shift.shape:
            raise DimensionMismatchError("log_scale and shift must have the same shape")

    @classmethod
    def identity(cls, d):
        return cls(np.zeros(d), np.zeros(d))

    @classmethod
    def from_theta(cls, theta):
        theta = np.asarray(theta, dtype=float)
        d = theta.size // 2
        return cls(theta[:d], theta[d:])

    @property
    def dim(self):
        return self.shift.size

    @property
    def scale(self):
        return np.exp(self.log_scale)

    @property
    def theta(self):
        return np.concatenate([self.log_scale, self.shift])

    def __call__(self, x):
        return self.shift + self.scale * np.asarray(x, dtype=float)

    def pushforward(self, reference):
        """Analytic pushforward of a Gaussian reference."""
        if not isinstance(reference, GaussianDensity):
            raise PreconditionError("analytic pushforward needs a Gaussian reference")
        s = self.scale
        return GaussianDensity(self.shift + s * reference.mean,
                               s[:, None] * reference.covariance * s[None, :])


@dataclass
class TemperingSchedule:
    """Tempering weights eps_m in [0, 1]; eps = 1 is ``p0`` and eps = 0 the target."""

    epsilons: np.ndarray
    p0: object

    def __post_init__(self):
        self.epsilons = np.atleast_1d(np.asarray(self.epsilons, dtype=float))
        if self.epsilons.size == 0 or np.any((self.epsilons < 0) | (self.epsilons > 1)):
            raise PreconditionError("tempering weights must lie in [0, 1]")

    def __len__(self):
        return self.epsilons.size


def temper_log_density(schedule, p, m):
    """``eps_m log p0 + (1 - eps_m) log p`` as an unnormalised density."""
    if not 0 <= m < len(schedule):
        raise PreconditionError(f"schedule index {m} out of range")
    return TemperedDensity(schedule.p0, p, schedule.epsilons[m])


def u_integrand(p, q, kernel, x, y):
    """u(x, y) = (q/p)(x) (q/p)(y) k_q(x, y), with the ratio formed in log space."""
    kernel = kernel or ImqKernel()
    lr = q.log_density(np.vstack([np.atleast_1d(x), np.atleast_1d(y)])) - p.log_density(
        np.vstack([np.atleast_1d(x), np.atleast_1d(y)]))
    kq = stein_kernel(kernel, x, y, q.score(x), q.score(y)).value
    return float(np.exp(lr[0] + lr[1]) * kq)


def u_matrix(p, q, kernel, points):
    """All pairwise u(x_i, x_j) for a batch of points."""
    kernel = kernel or ImqKernel()
    pts, _ = as_points(points, q.dim)
    lr = q.log_density(pts) - p.log_density(pts)
    if not np.all(np.isfinite(lr)):
        i = int(np.flatnonzero(~np.isfinite(lr))[0])
        raise EvaluationError(f"non-finite log ratio at batch index {i}", index=i)
    K = stein_matrix(kernel, pts, q.score(pts))
    return np.exp(lr[:, None] + lr[None, :]) * K


def u_statistic(p, q, kernel, points, include_diagonal=False):
    """Unbiased estimate of D^2 from a batch: mean of u over pairs i != j.

    ``include_diagonal=True`` gives the (biased) V-statistic instead.
    """
    U = u_matrix(p, q, kernel, points)
    n = U.shape[0]
    if include_diagonal:
        return float(U.sum() / (n * n))
    if n < 2:
        raise PreconditionError("U-statistic needs at least two points")
    return float((U.sum() - np.trace(U)) / (n * (n - 1)))


def grad_estimate(p, q, transport, ref_samples, kernel=None, fd_step=1e-5,
                  include_diagonal=False):
    """Stochastic gradient of theta -> D_{p,q}(T_theta # R)^2 with q held fixed.

    Each coordinate of ``grad_theta u`` is a central difference with step
    ``fd_step * max(1, |theta_k|)``, averaged over the i != j pairs of the
    transported batch.
    """
    ref = np.asarray(ref_samples, dtype=float)
    if ref.ndim == 1:
        ref = ref[:, None]
    if ref.shape[0] < 2:
        raise PreconditionError("need at least two reference samples")
    theta = transport.theta
    grad = np.empty_like(theta)
    for k in range(theta.size):
        h = fd_step * max(1.0, abs(theta[k]))
        vals = []
        for sgn in (1.0, -1.0):
            th = theta.copy()
            th[k] += sgn * h
            pts = AffineTransport.from_theta(th)(ref)
            try:
                vals.append(u_statistic(p, q, kernel, pts, include_diagonal))
            except EvaluationError as exc:
                raise EvaluationError(f"gradient stencil failed: {exc}", index=exc.index) from exc
        if not np.all(np.isfinite(vals)):
            raise EvaluationError("non-finite integrand along the finite-difference stencil")
        grad[k] = (vals[0] - vals[1]) / (2.0 * h)
    return grad


def clip_gradient(g, clip_norm):
    """Rescale ``g`` to 2-norm ``min(|g|, clip_norm)`` keeping its direction."""
    norm = float(np.linalg.norm(g))
    if clip_norm is None or norm <= clip_norm:
        return g
    return g * (clip_norm / norm)


@dataclass
class TransportFit:
    transport: AffineTransport
    # rows: iteration, objective, theta...
    trace: np.ndarray
    update_norms: np.ndarray = field(repr=False, default=None)

    def trace_to_csv(self, path):
        d = self.transport.dim
        header = ",".join(["iteration", "objective"]
                          + [f"log_scale{i + 1}" for i in range(d)]
                          + [f"shift{i + 1}" for i in range(d)])
        np.savetxt(path, self.trace, delimiter=",", header=header, comments="", fmt="%.17g")


def fit_transport(p, schedule, reference, transport_init, step=1e-3, clip_norm=30.0,
                  iters_per_temper=1, batch_n=64, seed=0, kernel=None, fd_step=1e-5,
                  divergence_threshold=1e12):
    """Clipped SGD on theta with q refreshed to the current pushforward each step.

    Iteration m uses target ``temper_log_density(schedule, p, m // iters_per_temper)``
    and ``q = T_{theta_m} # reference``; the update is
    ``theta <- theta - step * clip(grad)``.

    Returns a :class:`TransportFit` whose trace has one row per iteration:
    the U-statistic objective at ``theta_m`` followed by ``theta_m``.

    Raises:
        DivergenceError: the objective exceeded ``divergence_threshold``.
    """
    kernel = kernel or ImqKernel()
    rng = make_rng(seed)
    transport = AffineTransport(transport_init.log_scale, transport_init.shift)
    n_iter = len(schedule) * iters_per_temper
    rows = []
    norms = np.empty(n_iter)
    for it in range(n_iter):
        pm = temper_log_density(schedule, p, it // iters_per_temper)
        q = transport.pushforward(reference)
        batch = reference.sample(rng, batch_n)
        obj = u_statistic(pm, q, kernel, transport(batch))
        rows.append(np.concatenate([[it, obj], transport.theta]))
        if not np.isfinite(obj) or abs(obj) > divergence_threshold:
            raise DivergenceError(f"objective {obj:.3e} at iteration {it}", trace=np.array(rows))
        g = clip_gradient(grad_estimate(pm, q, transport, batch, kernel, fd_step), clip_norm)
        update = step * g
        norms[it] = np.linalg.norm(update)
        transport = AffineTransport.from_theta(transport.theta - update)
    return TransportFit(transport=transport, trace=np.array(rows), update_norms=norms)
