"""Gradient-free Stein importance sampling.

Draw x_1..x_n from q, then choose simplex weights minimising
w^T Kt w with Kt_ij = r_i r_j k_q(x_i, x_j), r = q/p.  The self-normalised
importance-sampling weights (proportional to p/q) are the baseline.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg
from scipy.spatial.distance import cdist

from .density.models import as_points
from .discrepancy import ParticleMeasure, standardize as _standardize, weighted_quadratic_form
from .errors import DegenerateError, DimensionMismatchError, PreconditionError
from .kernel import ImqKernel, stein_matrix


@dataclass
class QpSolution:
    weights: np.ndarray
    objective: float
    iterations: int
    converged: bool
    kkt_residual: float
    # objective of the rescaled problem after every accepted iterate
    trace: list = field(default_factory=list, repr=False)
    log_scale: float = 0.0


@dataclass
class WeightedComparison:
    stein_weighted: ParticleMeasure
    snis_weighted: ParticleMeasure
    energy_distance_stein: float | None = None
    energy_distance_snis: float | None = None
    qp: QpSolution | None = None
    gfksd_stein: float | None = None
    gfksd_snis: float | None = None

    def summary(self):
        return {
            "objective": None if self.qp is None else self.qp.objective,
            "gfksd": self.gfksd_stein,
            "gfksd_snis": self.gfksd_snis,
            "energy_distance_stein": self.energy_distance_stein,
            "energy_distance_snis": self.energy_distance_snis,
            "converged": None if self.qp is None else self.qp.converged,
            "kkt_residual": None if self.qp is None else self.qp.kkt_residual,
        }

    def to_json(self):
        return json.dumps(self.summary())


# -- simplex QP -------------------------------------------------------------

def project_simplex(v):
    """Euclidean projection of ``v`` onto the probability simplex (sort-based)."""
    v = np.asarray(v, dtype=float)
    n = v.size
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    rho = np.nonzero(u * np.arange(1, n + 1) > css)[0][-1]
    tau = css[rho] / (rho + 1.0)
    return np.maximum(v - tau, 0.0)


def _power_iteration(A, iters=200, seed=0):
    v = np.random.default_rng(seed).standard_normal(A.shape[0])
    v /= np.linalg.norm(v)
    lam = 0.0
    for _ in range(iters):
        w = A @ v
        nw = np.linalg.norm(w)
        if nw == 0.0:
            return 0.0
        v = w / nw
        lam_new = v @ (A @ v)
        if abs(lam_new - lam) <= 1e-10 * abs(lam_new):
            lam = lam_new
            break
        lam = lam_new
    return float(lam)


def kkt_residual(A, w, support_tol=1e-8):
    """max over the support of (A w)_i - min_j (A w)_j."""
    g = A @ w
    supp = w > support_tol
    if not supp.any():
        supp = w == w.max()
    return float(max(0.0, np.max(g[supp]) - g.min()))


def _objective(A, w):
    return float(w @ A @ w)


def _active_set_polish(A, w, tol, max_passes=200):
    """Primal active-set iterations started from a feasible ``w``.

    Yields the sequence of accepted iterates; each has objective no larger
    than its predecessor.
    """
    n = A.shape[0]
    free = w > 1e-12
    x = np.where(free, w, 0.0)
    x /= x.sum()
    for _ in range(max_passes):
        F = np.flatnonzero(free)
        m = F.size
        kkt = np.zeros((m + 1, m + 1))
        kkt[:m, :m] = 2.0 * A[np.ix_(F, F)]
        kkt[:m, m] = 1.0
        kkt[m, :m] = 1.0
        rhs = np.zeros(m + 1)
        rhs[m] = 1.0
        sol = linalg.lstsq(kkt, rhs, cond=None)[0]
        cand = np.zeros(n)
        cand[F] = sol[:m]
        step = cand - x
        if np.max(np.abs(step)) <= 1e-15:
            g = A @ x
            lam = g[F].min()
            outside = np.flatnonzero(~free)
            if outside.size == 0:
                return
            j = outside[np.argmin(g[outside])]
            if g[j] >= lam - tol:
                return
            free[j] = True
            continue
        neg = step < 0
        alpha = 1.0
        block = None
        if np.any(neg & free):
            ratios = np.full(n, np.inf)
            idx = neg & free
            ratios[idx] = -x[idx] / step[idx]
            j = int(np.argmin(ratios))
            if ratios[j] < 1.0:
                alpha, block = ratios[j], j
        x = np.maximum(x + alpha * step, 0.0)
        if block is not None:
            x[block] = 0.0
            free[block] = False
        x /= x.sum()
        yield x.copy()


def optimal_stein_weights(K, ratios=None, *, log_ratios=None, tol=1e-9, max_iters=50_000):
    """Minimise ``w^T Kt w`` over the probability simplex.

    ``Kt = diag(r) K diag(r)`` with ``r`` given either as ``ratios`` or, more
    robustly, as ``log_ratios``.  The largest log-ratio is factored out, which
    rescales the objective by a positive constant without moving the argmin.

    The solver is monotone accelerated projected gradient descent (step
    ``1 / lambda_max``) followed by a primal active-set polish; ``tol`` bounds
    the KKT residual of the rescaled problem.
    """
    K = np.asarray(K, dtype=float)
    n = K.shape[0]
    if K.shape != (n, n) or n < 1:
        raise DimensionMismatchError("K must be a square matrix")
    if log_ratios is None:
        if ratios is None:
            log_ratios = np.zeros(n)
        else:
            ratios = np.asarray(ratios, dtype=float)
            if np.any(~np.isfinite(ratios)) or np.any(ratios <= 0):
                raise PreconditionError("ratios must be finite and positive")
            log_ratios = np.log(ratios)
    lr = np.asarray(log_ratios, dtype=float)
    if lr.shape != (n,):
        raise DimensionMismatchError("one ratio per row of K is required")
    if not np.all(np.isfinite(lr)) or not np.all(np.isfinite(K)):
        raise PreconditionError("K and the ratios must be finite")
    shift = float(lr.max())
    r = np.exp(lr - shift)
    A = (r[:, None] * K) * r[None, :]
    A = 0.5 * (A + A.T)
    if not np.all(np.isfinite(A)):
        raise PreconditionError("weighted Stein matrix contains non-finite entries")

    def finish(w, iters, trace):
        w = np.maximum(w, 0.0)
        w /= w.sum()
        res = kkt_residual(A, w)
        val, _ = weighted_quadratic_form(A, w)
        return QpSolution(
            weights=w,
            objective=max(val, 0.0) * math.exp(2.0 * shift),
            iterations=iters,
            converged=res < tol,
            kkt_residual=res,
            trace=trace,
            log_scale=2.0 * shift,
        )

    if n == 1:
        return finish(np.ones(1), 0, [float(A[0, 0])])

    lip = 2.0 * _power_iteration(A) * 1.01
    if lip <= 0:
        return finish(np.full(n, 1.0 / n), 0, [0.0])
    x = np.full(n, 1.0 / n)
    fx = _objective(A, x)
    trace = [fx]
    y, t = x.copy(), 1.0
    it = 0
    for it in range(1, max_iters + 1):
        z = project_simplex(y - (2.0 * (A @ y)) / lip)
        fz = _objective(A, z)
        x_prev = x
        if fz <= fx:
            x, fx = z, fz
        t_new = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * t * t))
        y = x + (t / t_new) * (z - x) + ((t - 1.0) / t_new) * (x - x_prev)
        t = t_new
        trace.append(fx)
        if it % 25 == 0 and kkt_residual(A, x) < tol:
            break
        if it % 500 == 0:
            # the support has usually settled by now; an exact solve on it
            # finishes ill-conditioned problems that first-order steps crawl on
            xp, fp, steps = _polish(A, x, fx, tol)
            if kkt_residual(A, xp) < tol:
                x, fx = xp, fp
                trace.extend(steps)
                break
            # adaptive restart keeps momentum from stalling on flat faces
            y, t = x.copy(), 1.0

    best, best_res = x, kkt_residual(A, x)
    if best_res >= tol:
        xp, fp, steps = _polish(A, x, fx, tol)
        res = kkt_residual(A, xp)
        if res < best_res:
            best, best_res = xp, res
            trace.extend(steps)
    return finish(best, it, trace)


def _polish(A, x, fx, tol):
    """Run the active-set polish from ``x`` while the objective does not increase."""
    steps = []
    for cand in _active_set_polish(A, x, tol):
        fc = _objective(A, cand)
        if fc > fx:
            break
        x, fx = cand, fc
        steps.append(fx)
    return x, fx, steps


# -- baselines and metrics ----------------------------------------------------

def self_normalized_weights(p, q, points):
    """Particle measure with weights proportional to ``p/q``."""
    if p.dim != q.dim:
        raise DimensionMismatchError("p and q must share a dimension")
    pts, _ = as_points(points, q.dim)
    with np.errstate(invalid="ignore"):
        lw = np.atleast_1d(p.log_density(pts) - q.log_density(pts))
    if np.any(np.isnan(lw)) or np.any(lw == np.inf):
        raise PreconditionError("q must be positive at every point")
    if not np.any(np.isfinite(lw)):
        raise DegenerateError("all importance weights underflow")
    w = np.exp(lw - lw[np.isfinite(lw)].max())
    total = w.sum()
    if not total > 0:
        raise DegenerateError("all importance weights underflow")
    return ParticleMeasure(pts, w / total)


def energy_distance(a, b):
    """Weighted energy distance 2E|X-Y| - E|X-X'| - E|Y-Y'| (V-statistic form)."""
    if a.dim != b.dim:
        raise DimensionMismatchError("measures live in different dimensions")
    xy = a.weights @ cdist(a.points, b.points) @ b.weights
    xx = a.weights @ cdist(a.points, a.points) @ a.weights
    yy = b.weights @ cdist(b.points, b.points) @ b.weights
    return float(max(2.0 * xy - xx - yy, 0.0))


def make_rng(seed):
    """Counter-based generator: the same seed always yields the same stream."""
    return np.random.Generator(np.random.Philox(seed))


def stein_importance_sample(p, q, kernel=None, n=100, rng_seed=0, reference=None,
                            standardize=False, whiten=False, tol=1e-9, max_iters=50_000,
                            points=None):
    """Draw ``n`` points from ``q`` and weight them by the optimal Stein weights.

    Args:
        p: target, possibly unnormalised; only log-density evaluations are used.
        q: surrogate with sampling and a score.
        kernel: IMQ kernel, defaults to sigma=1, beta=1/2.
        reference: optional ``(m, d)`` samples from p for energy distances.
        standardize: evaluate the discrepancy after ``x -> C^{-1} x`` with ``C``
            the covariance of ``q`` (``whiten`` switches to ``L^{-1} x``).
        points: use these points instead of sampling from ``q``.

    Points where ``p`` vanishes get zero weight in both measures.
    """
    kernel = kernel or ImqKernel()
    if points is None:
        x = q.sample(make_rng(rng_seed), n)
    else:
        x, _ = as_points(points, q.dim)
    pz, qz, z = p, q, x
    if standardize:
        cov = getattr(q, "covariance", None)
        if cov is None:
            cov = np.atleast_2d(np.cov(x, rowvar=False))
        std = _standardize(cov, x, whiten=whiten)
        pz, qz, z = std.density(p), std.density(q), std.points

    with np.errstate(invalid="ignore"):
        lr = np.atleast_1d(qz.log_density(z) - pz.log_density(z))
    keep = np.isfinite(lr)
    if not keep.any():
        raise DegenerateError("target density vanishes at every sampled point")
    K = stein_matrix(kernel, z[keep], qz.score(z[keep]))
    qp = optimal_stein_weights(K, log_ratios=lr[keep], tol=tol, max_iters=max_iters)
    w_stein = np.zeros(x.shape[0])
    w_stein[keep] = qp.weights
    snis = self_normalized_weights(p, q, x)

    shift = float(lr[keep].max())
    v_snis = snis.weights[keep] * np.exp(lr[keep] - shift)
    val_snis, _ = weighted_quadratic_form(K, v_snis)
    out = WeightedComparison(
        stein_weighted=ParticleMeasure(x, w_stein),
        snis_weighted=snis,
        qp=qp,
        gfksd_stein=math.sqrt(qp.objective),
        gfksd_snis=math.sqrt(max(val_snis, 0.0) * math.exp(2.0 * shift)),
    )
    if reference is not None:
        ref = reference if isinstance(reference, ParticleMeasure) else ParticleMeasure.uniform(reference)
        out.energy_distance_stein = energy_distance(out.stein_weighted, ref)
        out.energy_distance_snis = energy_distance(out.snis_weighted, ref)
    return out
