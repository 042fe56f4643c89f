"""Location-scale test sequences L^n(x) = a_n + b_n x applied to a base measure."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import special
from scipy.stats import qmc

from ..discrepancy import ParticleMeasure, qmc_particles_1d
from ..errors import PreconditionError


def geometric_schedule(start, end, length, decay=1e-3):
    """``end + (start - end) * rho^(n-1)`` with ``rho^(length-1) = decay``."""
    if length < 2:
        return np.array([float(end)])
    rho = decay ** (1.0 / (length - 1))
    return end + (start - end) * rho ** np.arange(length)


@dataclass
class LocationScaleSequence:
    """A sequence of pushforwards of ``base`` under ``x -> a_n + b_n x``."""

    name: str
    base: object
    a_seq: np.ndarray
    b_seq: np.ndarray
    converging: bool = True

    def __post_init__(self):
        self.a_seq = np.asarray(self.a_seq, dtype=float)
        self.b_seq = np.asarray(self.b_seq, dtype=float)
        if self.a_seq.shape != self.b_seq.shape:
            raise PreconditionError("a and b sequences must have equal length")
        if np.any(self.b_seq <= 0):
            raise PreconditionError("scale sequence must be positive")

    @property
    def direction(self):
        return "converging" if self.converging else "non-converging"

    def __len__(self):
        return self.a_seq.size

    def base_particles(self, m, seed=0):
        """QMC discretisation of the base: inverse CDF in 1D, scrambled Sobol otherwise."""
        if self.base.dim == 1:
            return qmc_particles_1d(self.base, m).points
        sob = qmc.Sobol(self.base.dim, scramble=True, seed=seed)
        u = sob.random(m)
        z = special.ndtri(u)
        mean = getattr(self.base, "mean")
        return mean + z @ self.base.cholesky.T

    def element(self, n, base_points):
        """Particles of the n-th element (0-based) from precomputed base particles."""
        return ParticleMeasure.uniform(self.a_seq[n] + self.b_seq[n] * base_points)

    @classmethod
    def from_config(cls, cfg, base, length):
        a = geometric_schedule(cfg["a"][0], cfg["a"][1], length, cfg.get("decay", 1e-3))
        b = geometric_schedule(cfg["b"][0], cfg["b"][1], length, cfg.get("decay", 1e-3))
        return cls(cfg["name"], base, a, b, cfg.get("converging", True))
