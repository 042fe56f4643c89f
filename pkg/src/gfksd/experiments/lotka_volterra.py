"""Lotka-Volterra posterior on the Hudson's Bay hare-lynx records.

Parameters are inferred on the log scale, theta = log(alpha, beta, gamma,
delta, u0, v0, sigma1, sigma2).  Log-normal priors on the positive
parameters are Gaussian priors on theta, so no Jacobian term appears.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from importlib import resources

import numpy as np
from scipy.integrate import solve_ivp

from ..density import CustomDensity, fit_laplace
from ..errors import NumericalError, PreconditionError
from ..kernel import ImqKernel
from ..sampling import stein_importance_sample
from .report import ExperimentReport, config_hash

log = logging.getLogger(__name__)

PARAM_NAMES = ("alpha", "beta", "gamma", "delta", "u0", "v0", "sigma1", "sigma2")
PRIOR_MEAN = np.log([0.7, 0.02, 0.7, 0.02, 10.0, 10.0, 0.25, 0.25])
PRIOR_SD = np.array([0.6, 0.3, 0.6, 0.3, 1.0, 1.0, 0.02, 0.02])
_LOG_2PI = np.log(2.0 * np.pi)


def lv_rhs(state, params):
    """``(alpha u - beta u v, -gamma v + delta u v)``."""
    u, v = state[0], state[1]
    a, b, g, d = params[0], params[1], params[2], params[3]
    return np.array([a * u - b * u * v, -g * v + d * u * v])


def _sens_rhs(t, y, a, b, g, d):
    u, v = y[0], y[1]
    S = y[2:].reshape(2, 6)
    J = np.array([[a - b * v, -b * u], [d * v, -g + d * u]])
    dfdp = np.array([[u, -u * v, 0.0, 0.0, 0.0, 0.0],
                     [0.0, 0.0, -v, u * v, 0.0, 0.0]])
    dS = J @ S + dfdp
    return np.concatenate([[a * u - b * u * v, -g * v + d * u * v], dS.ravel()])


def integrate_lv(params, t_grid, rtol=1e-8, atol=1e-10, sensitivities=False, t0=0.0):
    """Dormand-Prince 5(4) solution at ``t_grid`` for ``params = (alpha, beta, gamma, delta, u0, v0)``.

    Returns an ``(len(t_grid), 2)`` trajectory; with ``sensitivities=True``
    also the ``(len(t_grid), 2, 6)`` derivatives of (u, v) with respect to
    the six parameters, from the forward sensitivity equations.

    Raises:
        NumericalError: the solver failed (e.g. step-size underflow) or the
            trajectory left the positive quadrant.
    """
    params = np.asarray(params, dtype=float)
    if params.shape[0] < 6:
        raise PreconditionError("need (alpha, beta, gamma, delta, u0, v0)")
    t = np.asarray(t_grid, dtype=float)
    if t.ndim != 1 or np.any(np.diff(t) <= 0) or t[0] < t0:
        raise PreconditionError("t_grid must be strictly increasing and start at or after t0")
    if not np.all(np.isfinite(params[:6])) or np.any(params[4:6] <= 0):
        raise PreconditionError("parameters must be finite with positive initial conditions")
    a, b, g, d, u0, v0 = params[:6]
    y0 = np.array([u0, v0])
    span = (t0, t[-1]) if t[-1] > t0 else (t0, t0 + 1.0)
    if sensitivities:
        S0 = np.zeros((2, 6))
        S0[0, 4] = S0[1, 5] = 1.0
        sol = solve_ivp(_sens_rhs, span, np.concatenate([y0, S0.ravel()]), method="RK45",
                        t_eval=t, rtol=rtol, atol=atol, args=(a, b, g, d))
    else:
        sol = solve_ivp(lambda _t, y: lv_rhs(y, params), span, y0, method="RK45",
                        t_eval=t, rtol=rtol, atol=atol)
    if sol.status != 0 or sol.y.shape[1] != t.size:
        raise NumericalError(f"ODE solve failed: {sol.message}")
    traj = sol.y[:2].T
    if not np.all(np.isfinite(traj)) or np.any(traj <= 0):
        raise NumericalError("trajectory left the positive quadrant")
    if sensitivities:
        return traj, sol.y[2:].T.reshape(-1, 2, 6)
    return traj


def _data_path():
    return resources.files("gfksd.experiments").joinpath("data/hudson_bay.csv")


@dataclass
class LotkaVolterraModel:
    times: np.ndarray
    u_obs: np.ndarray
    v_obs: np.ndarray
    prior_mean: np.ndarray = field(default_factory=lambda: PRIOR_MEAN.copy())
    prior_sd: np.ndarray = field(default_factory=lambda: PRIOR_SD.copy())
    rtol: float = 1e-8
    atol: float = 1e-10
    n_failures: int = 0

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.u_obs = np.asarray(self.u_obs, dtype=float)
        self.v_obs = np.asarray(self.v_obs, dtype=float)
        if not (self.times.shape == self.u_obs.shape == self.v_obs.shape):
            raise PreconditionError("times and observations must have equal length")
        if np.any(self.u_obs <= 0) or np.any(self.v_obs <= 0):
            raise PreconditionError("log-normal observations must be positive")

    @classmethod
    def hudson_bay(cls, path=None):
        """The bundled 21 annual records (t = 0..20)."""
        src = path if path is not None else _data_path()
        try:
            with open(src) as fh:
                lines = [ln for ln in fh if not ln.startswith("#")]
            data = np.loadtxt(lines[1:], delimiter=",", ndmin=2)
        except OSError as exc:
            raise PreconditionError(f"Lotka-Volterra dataset not found: {src}") from exc
        return cls(times=data[:, 1], u_obs=data[:, 2], v_obs=data[:, 3])

    @property
    def dim(self):
        return 8

    @property
    def prior_mode(self):
        return self.prior_mean.copy()

    def log_prior(self, theta):
        z = (np.asarray(theta, dtype=float) - self.prior_mean) / self.prior_sd
        return float(-0.5 * z @ z - np.sum(np.log(self.prior_sd)) - 0.5 * 8 * _LOG_2PI)

    def grad_log_prior(self, theta):
        return -(np.asarray(theta, dtype=float) - self.prior_mean) / self.prior_sd**2

    def _residuals(self, theta, sensitivities=False):
        p = np.exp(theta)
        out = integrate_lv(p[:6], self.times, self.rtol, self.atol, sensitivities)
        traj = out[0] if sensitivities else out
        ru = np.log(self.u_obs) - np.log(traj[:, 0])
        rv = np.log(self.v_obs) - np.log(traj[:, 1])
        return (ru, rv, traj, out[1]) if sensitivities else (ru, rv)

    def log_likelihood(self, theta):
        theta = np.asarray(theta, dtype=float)
        ru, rv = self._residuals(theta)
        ls1, ls2 = theta[6], theta[7]
        n = self.times.size
        ll = -0.5 * np.sum(ru**2) * np.exp(-2 * ls1) - n * ls1
        ll += -0.5 * np.sum(rv**2) * np.exp(-2 * ls2) - n * ls2
        ll -= np.sum(np.log(self.u_obs)) + np.sum(np.log(self.v_obs)) + n * _LOG_2PI
        return float(ll)

    def grad_log_likelihood(self, theta):
        theta = np.asarray(theta, dtype=float)
        ru, rv, traj, S = self._residuals(theta, sensitivities=True)
        s1, s2 = np.exp(-2 * theta[6]), np.exp(-2 * theta[7])
        # d log u(t_i) / d theta_k = p_k (du/dp_k) / u
        p = np.exp(theta[:6])
        dlu = S[:, 0, :] * p / traj[:, :1]
        dlv = S[:, 1, :] * p / traj[:, 1:]
        g = np.empty(8)
        g[:6] = s1 * ru @ dlu + s2 * rv @ dlv
        n = self.times.size
        g[6] = np.sum(ru**2) * s1 - n
        g[7] = np.sum(rv**2) * s2 - n
        return g

    def score(self, theta):
        return self.grad_log_prior(theta) + self.grad_log_likelihood(theta)

    def density(self, with_score=True):
        """The posterior as a :class:`CustomDensity`; ODE failures give -inf."""
        return CustomDensity(lambda th: lv_log_posterior(self, th), 8,
                             score=self.score if with_score else None, kind="custom",
                             info={"model": "lotka_volterra"})


def lv_log_posterior(model, theta):
    """Unnormalised log posterior in theta; -inf (with a logged warning) if the ODE fails."""
    theta = np.asarray(theta, dtype=float)
    if theta.shape != (8,) or not np.all(np.isfinite(theta)):
        raise PreconditionError("theta must be a finite vector of length 8")
    try:
        return model.log_prior(theta) + model.log_likelihood(theta)
    except (NumericalError, PreconditionError) as exc:
        model.n_failures += 1
        log.warning("Lotka-Volterra solve failed at theta=%s: %s", np.array2string(theta, precision=4), exc)
        return -np.inf


def synthetic_model(theta, times=None, noise_sd=None, rng=None):
    """Observations generated at ``theta`` (noise-free unless ``noise_sd`` is set)."""
    times = np.arange(21.0) if times is None else np.asarray(times, dtype=float)
    traj = integrate_lv(np.exp(theta[:6]), times)
    obs = np.log(traj)
    if noise_sd is not None:
        obs = obs + noise_sd * rng.standard_normal(obs.shape)
    return LotkaVolterraModel(times, np.exp(obs[:, 0]), np.exp(obs[:, 1]))


def run_lv_demo(n=20, seed=0, reference=None, model=None, kernel=None, standardize=True,
                laplace_method="lbfgs"):
    """Stein importance sampling of the Lotka-Volterra posterior.

    Builds the Laplace surrogate from the prior mode (its gradient count is
    recorded and does not depend on ``n``), draws ``n`` points, solves for the
    optimal weights in standardised coordinates, and compares with
    self-normalised weights.  ``reference`` is an optional ``(m, 8)`` array of
    posterior samples used for energy distances.

    Returns ``(WeightedComparison, ExperimentReport)``.
    """
    model = model or LotkaVolterraModel.hudson_bay()
    kernel = kernel or ImqKernel()
    post = model.density()
    q = fit_laplace(post, model.prior_mode, method=laplace_method, grad_tol=1e-5)
    cmp = stein_importance_sample(post, q, kernel, n=n, rng_seed=seed, reference=reference,
                                  standardize=standardize)
    meta = {
        "seed": seed,
        "n": n,
        "standardize": standardize,
        "laplace": {
            "mean": q.mean.tolist(),
            "sd": np.sqrt(np.diag(q.covariance)).tolist(),
            "n_iters": q.info["n_iters"],
            "n_grad_evals": q.info["n_grad_evals"],
            "n_grad_evals_path": q.info["n_grad_evals_path"],
            "n_grad_evals_hessian": q.info["n_grad_evals_hessian"],
            "method": q.info["method"],
        },
        "ode_failures": model.n_failures,
        "config_hash": config_hash({"n": n, "seed": seed, "standardize": standardize,
                                    "sigma": kernel.sigma, "beta": kernel.beta}),
    }
    meta.update({k: v for k, v in cmp.summary().items()})
    report = ExperimentReport(metadata=meta)
    report.add("stein", n, cmp.gfksd_stein, "laplace", kernel.sigma, kernel.beta,
               energy_distance="" if cmp.energy_distance_stein is None else cmp.energy_distance_stein)
    report.add("snis", n, cmp.gfksd_snis, "laplace", kernel.sigma, kernel.beta,
               energy_distance="" if cmp.energy_distance_snis is None else cmp.energy_distance_snis)
    return cmp, report
