"""Random-walk Metropolis, for desk-scale reference samples on analytic targets."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import linalg

from ..errors import PreconditionError
from ..sampling import make_rng


@dataclass
class MetropolisResult:
    samples: np.ndarray
    acceptance_rate: float


def random_walk_metropolis(log_density, x0, n_samples, proposal_cov=1.0, seed=0, burn_in=1000, thin=1):
    """Gaussian random-walk Metropolis on an unnormalised log density.

    ``log_density`` maps a point of shape ``(d,)`` to a float; ``proposal_cov``
    is a scalar, a vector of variances or a full matrix.
    """
    x = np.atleast_1d(np.asarray(x0, dtype=float)).copy()
    d = x.size
    if n_samples < 1 or thin < 1 or burn_in < 0:
        raise PreconditionError("n_samples and thin must be positive, burn_in nonnegative")
    cov = np.asarray(proposal_cov, dtype=float)
    if cov.ndim == 0:
        cov = cov * np.eye(d)
    elif cov.ndim == 1:
        cov = np.diag(cov)
    chol = linalg.cholesky(cov, lower=True)
    rng = make_rng(seed)
    lp = float(log_density(x))
    if not np.isfinite(lp):
        raise PreconditionError("the starting point must have positive density")
    total = burn_in + n_samples * thin
    out = np.empty((n_samples, d))
    accepted = 0
    for it in range(total):
        prop = x + chol @ rng.standard_normal(d)
        lp_prop = float(log_density(prop))
        if np.log(rng.uniform()) < lp_prop - lp:
            x, lp = prop, lp_prop
            accepted += 1
        k = it - burn_in
        if k >= 0 and k % thin == 0:
            out[k // thin] = x
    return MetropolisResult(out, accepted / total)
