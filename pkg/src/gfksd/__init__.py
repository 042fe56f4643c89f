"""Gradient-free kernel Stein discrepancy and its applications."""

from .density import (
    CustomDensity,
    DensityModel,
    GaussianDensity,
    KdeDensity,
    MixtureDensity,
    StudentTDensity,
    fit_gmm,
    fit_kde,
    fit_laplace,
    load_density,
)
from .discrepancy import (
    GfksdResult,
    ParticleMeasure,
    gfksd_squared,
    gfksd_via_reparam,
    qmc_particles_1d,
    standardize,
)
from .errors import GfksdError
from .kernel import ImqKernel, stein_kernel, stein_matrix
from .sampling import (
    QpSolution,
    WeightedComparison,
    energy_distance,
    optimal_stein_weights,
    self_normalized_weights,
    stein_importance_sample,
)
from .varinf import AffineTransport, TemperingSchedule, fit_transport, grad_estimate

__version__ = "0.1.0"
