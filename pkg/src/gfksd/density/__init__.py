"""Density models and the surrogate (q) constructions."""

from .fit import fit_gmm, fit_kde, fit_laplace, silverman_bandwidth
from .io import density_from_dict, load_density, load_samples, save_samples
from .models import (
    CustomDensity,
    DensityModel,
    GaussianDensity,
    KdeDensity,
    LinearPushforward,
    MixtureDensity,
    StudentTDensity,
    TemperedDensity,
    finite_difference_score,
    log_density_ratio,
    score,
)

__all__ = [
    "CustomDensity",
    "DensityModel",
    "GaussianDensity",
    "KdeDensity",
    "LinearPushforward",
    "MixtureDensity",
    "StudentTDensity",
    "TemperedDensity",
    "density_from_dict",
    "finite_difference_score",
    "fit_gmm",
    "fit_kde",
    "fit_laplace",
    "load_density",
    "load_samples",
    "log_density_ratio",
    "save_samples",
    "score",
    "silverman_bandwidth",
]
