"""Surrogate constructions: Laplace approximation, BIC-selected GMM, Silverman KDE."""

from __future__ import annotations

import numpy as np
from scipy import linalg, optimize, special

from ..errors import (
    ConvergenceError,
    DefinitenessError,
    DegenerateError,
    PreconditionError,
)
from .models import GaussianDensity, KdeDensity, MixtureDensity, finite_difference_score

VARIANCE_FLOOR = 1e-8


class _CountingGradient:
    """Gradient of ``log target`` that counts its own evaluations."""

    def __init__(self, target, fd_step=1e-5):
        self.target = target
        self.fd_step = fd_step
        self.count = 0

    def __call__(self, x):
        self.count += 1
        if self.target.has_score:
            return np.asarray(self.target.score(x), dtype=float)
        return finite_difference_score(self.target.log_density, x, self.fd_step)


def _gradient_descent(f, grad, x0, max_iters, grad_tol, c=1e-4):
    """Minimise ``f`` by steepest descent with Armijo backtracking."""
    x = np.array(x0, dtype=float)
    fx = f(x)
    g = grad(x)
    t = 1.0
    for it in range(max_iters):
        if not np.all(np.isfinite(g)):
            raise ConvergenceError("non-finite gradient during Laplace optimisation", best=x)
        if np.max(np.abs(g)) < grad_tol:
            return x, it, True
        gg = g @ g
        while True:
            x_new = x - t * g
            f_new = f(x_new)
            if np.isfinite(f_new) and f_new <= fx - c * t * gg:
                break
            t *= 0.5
            if t < 1e-30:
                # no descent possible at working precision; x is as good as it gets
                return x, it, np.max(np.abs(g)) < np.sqrt(grad_tol)
        x, fx = x_new, f_new
        g = grad(x)
        t = min(2.0 * t, 1e8)
    return x, max_iters, np.max(np.abs(g)) < grad_tol


def fit_laplace(target, init, max_iters=10_000, grad_tol=1e-6, fd_step=1e-4, method="gd"):
    """Laplace approximation N(x*, H^{-1}) of ``target`` around a local mode.

    ``x*`` is found by maximising ``log target`` from ``init``, either by
    steepest descent with Armijo backtracking (``method="gd"``) or by L-BFGS
    (``method="lbfgs"``).  ``H`` is minus the Hessian of ``log target`` at
    ``x*``, obtained from central differences of the gradient with step
    ``fd_step * (1 + |x*_i|)`` and symmetrised.  A final Newton step with
    this ``H`` refines ``x*`` (one more gradient evaluation).

    When the target has no analytic score its gradient is taken by central
    differences of ``log_density``.  The returned model's ``info`` records the
    number of gradient evaluations spent on the optimisation path and on the
    Hessian.

    Raises:
        ConvergenceError: the optimiser did not reach ``grad_tol`` within
            ``max_iters``; ``best`` holds the final iterate.
        DefinitenessError: the negative Hessian is not positive definite.
    """
    x0 = np.atleast_1d(np.asarray(init, dtype=float))
    if x0.shape != (target.dim,):
        raise PreconditionError(f"init must have shape ({target.dim},)")
    if not np.all(np.isfinite(x0)):
        raise PreconditionError("init must be finite")

    grad = _CountingGradient(target)

    def neg_log(x):
        return -float(target.log_density(x))

    def neg_grad(x):
        return -grad(x)

    if method == "gd":
        x_star, n_iter, ok = _gradient_descent(neg_log, neg_grad, x0, max_iters, grad_tol)
    elif method == "lbfgs":
        res = optimize.minimize(neg_log, x0, jac=neg_grad, method="L-BFGS-B",
                                options={"maxiter": max_iters, "gtol": grad_tol})
        x_star, n_iter = res.x, res.nit
        ok = res.success or np.max(np.abs(neg_grad(x_star))) < grad_tol
    else:
        raise ValueError(f"unknown method {method!r}")
    if not ok:
        raise ConvergenceError(
            f"Laplace optimisation did not converge in {max_iters} iterations", best=x_star
        )
    n_path = grad.count

    d = target.dim
    hess = np.empty((d, d))
    for i in range(d):
        h = fd_step * (1.0 + abs(x_star[i]))
        e = np.zeros(d)
        e[i] = h
        hess[:, i] = (grad(x_star + e) - grad(x_star - e)) / (2.0 * h)
    neg_hess = -0.5 * (hess + hess.T)
    try:
        chol = linalg.cholesky(neg_hess, lower=True)
    except linalg.LinAlgError as exc:
        raise DefinitenessError("negative Hessian at the mode is not positive definite") from exc
    # one Newton correction with the finite-difference Hessian; exact for
    # Gaussian targets, and only kept if it does not lower the log density
    g = grad(x_star)
    x_newton = x_star + linalg.cho_solve((chol, True), g)
    if np.all(np.isfinite(x_newton)) and -neg_log(x_newton) >= -neg_log(x_star):
        x_star = x_newton
    cov = linalg.cho_solve((chol, True), np.eye(d))
    info = {
        "n_iters": int(n_iter),
        "n_grad_evals_path": int(n_path),
        "n_grad_evals_hessian": int(grad.count - n_path),
        "n_grad_evals": int(grad.count),
        "method": method,
    }
    return GaussianDensity(x_star, 0.5 * (cov + cov.T), info=info)


# -- Gaussian mixtures --------------------------------------------------------

def _kmeans_pp(x, k, rng):
    """k-means++ seeding: returns ``k`` rows of ``x``."""
    n = x.shape[0]
    centres = [x[rng.integers(n)]]
    d2 = np.sum((x - centres[0]) ** 2, axis=1)
    for _ in range(1, k):
        total = d2.sum()
        if total <= 0:
            idx = rng.integers(n)
        else:
            idx = rng.choice(n, p=d2 / total)
        centres.append(x[idx])
        d2 = np.minimum(d2, np.sum((x - x[idx]) ** 2, axis=1))
    return np.array(centres)


def _gauss_logpdf(x, mean, cov):
    chol = linalg.cholesky(cov, lower=True)
    z = linalg.solve_triangular(chol, (x - mean).T, lower=True)
    d = x.shape[1]
    return -0.5 * np.sum(z * z, axis=0) - np.sum(np.log(np.diag(chol))) - 0.5 * d * np.log(2 * np.pi)


def _em(x, k, rng, max_iter, tol):
    """One EM run from a k-means++ start.

    Returns ``(weights, means, covs, loglik_trace)`` or ``None`` if a
    component collapsed below the variance floor.
    """
    n, d = x.shape
    means = _kmeans_pp(x, k, rng)
    base_cov = np.atleast_2d(np.cov(x, rowvar=False, bias=True))
    covs = np.repeat(base_cov[None], k, axis=0)
    weights = np.full(k, 1.0 / k)
    trace = []
    for _ in range(max_iter):
        try:
            logs = np.stack([np.log(w) + _gauss_logpdf(x, m, c)
                             for w, m, c in zip(weights, means, covs)])
        except linalg.LinAlgError:
            return None
        norm = special.logsumexp(logs, axis=0)
        ll = float(norm.sum())
        trace.append(ll)
        if len(trace) > 1 and trace[-1] - trace[-2] <= tol * abs(trace[-2]):
            break
        resp = np.exp(logs - norm)
        nk = resp.sum(axis=1)
        if np.any(nk <= 0):
            return None
        weights = nk / n
        means = (resp @ x) / nk[:, None]
        covs = np.empty((k, d, d))
        for j in range(k):
            r = x - means[j]
            covs[j] = (resp[j][:, None] * r).T @ r / nk[j]
            covs[j] = 0.5 * (covs[j] + covs[j].T)
            if np.linalg.eigvalsh(covs[j])[0] < VARIANCE_FLOOR:
                return None
    return weights, means, covs, trace


def fit_gmm(samples, max_components, rng=None, n_restarts=5, max_iter=1000, tol=1e-10):
    """Fit Gaussian mixtures with 1..max_components components, keep the BIC minimiser.

    Each component count is fitted by EM from ``n_restarts`` k-means++ starts
    and the run with the best final log-likelihood is kept.  BIC is
    ``-2 loglik + n_params log n`` with full covariances.

    A component count whose restarts all collapse below the variance floor is
    dropped from the comparison (listed in ``info["collapsed"]``); if every
    count collapses, :class:`DegenerateError` is raised.

    The returned mixture's ``info`` holds the BIC per component count and the
    per-iteration log-likelihood trace of the selected fit.
    """
    x = np.asarray(samples, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    n, d = x.shape if x.size else (0, 1)
    if max_components < 1:
        raise PreconditionError("max_components must be at least 1")
    if n == 0 or n <= d * max_components:
        raise PreconditionError("need more than d * max_components samples")
    if rng is None or isinstance(rng, (int, np.integer)):
        rng = np.random.default_rng(0 if rng is None else rng)

    bics = {}
    fits = {}
    collapsed = []
    for k in range(1, max_components + 1):
        best = None
        for _ in range(n_restarts):
            run = _em(x, k, rng, max_iter, tol)
            if run is not None and (best is None or run[3][-1] > best[3][-1]):
                best = run
        if best is None:
            # every restart collapsed: this component count is infeasible
            collapsed.append(k)
            continue
        n_params = (k - 1) + k * d + k * d * (d + 1) // 2
        bics[k] = -2.0 * best[3][-1] + n_params * np.log(n)
        fits[k] = best
    if not fits:
        raise DegenerateError(
            f"EM collapsed below variance floor in all {n_restarts} restarts for every component count"
        )
    k_best = min(bics, key=bics.get)
    w, means, covs, trace = fits[k_best]
    comps = [GaussianDensity(m, c) for m, c in zip(means, covs)]
    info = {"n_components": k_best, "bic": bics, "collapsed": collapsed, "loglik_trace": trace}
    return MixtureDensity(w / w.sum(), comps, info=info)


# -- kernel density estimation ------------------------------------------------

def silverman_bandwidth(samples):
    """Per-dimension Silverman bandwidth ``(4 / ((d + 2) n))^(1/(d+4)) * std``."""
    x = np.asarray(samples, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    n, d = x.shape
    sd = x.std(axis=0)
    if np.any(sd <= 0):
        raise DegenerateError("zero sample variance; bandwidth is degenerate")
    return (4.0 / ((d + 2) * n)) ** (1.0 / (d + 4)) * sd


def fit_kde(samples):
    """Gaussian KDE with Silverman's rule-of-thumb bandwidth."""
    x = np.asarray(samples, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    if x.shape[0] < 2:
        raise PreconditionError("KDE needs at least two samples")
    return KdeDensity(x, silverman_bandwidth(x))
