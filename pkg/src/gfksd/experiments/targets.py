"""Named one-dimensional targets used by the experiments."""

import numpy as np

from ..density import GaussianDensity, MixtureDensity, StudentTDensity


def _gauss(mean, sd):
    return GaussianDensity([mean], [[sd * sd]])


def three_component_mixture():
    """Trimodal-ish mixture used by the convergence study.

    The listed spreads (0.2, 0.2, 0.9) are component standard deviations; with
    that reading the Laplace approximation from 0 is N(0.3, 0.2041^2).
    """
    return MixtureDensity(
        [0.375, 0.5625, 0.0625],
        [_gauss(-0.4, 0.2), _gauss(0.3, 0.2), _gauss(0.06, 0.9)],
    )


def four_component_mixture():
    """Narrow three-bump mixture on a wide base component (variances 0.1^2, 0.05^2, 0.1^2, 1)."""
    return MixtureDensity(
        [0.3125, 0.3125, 0.3125, 0.0625],
        [_gauss(-0.3, 0.1), _gauss(0.0, 0.05), _gauss(0.3, 0.1), _gauss(0.0, 1.0)],
    )


def student_t_mixture():
    """Mixture of four Student-t(10) components."""
    return MixtureDensity(
        [0.1, 0.2, 0.3, 0.4],
        [StudentTDensity(10, m, s) for m, s in zip([-0.4, -0.2, 0.0, 0.3], [0.05, 0.1, 0.1, 0.3])],
    )


def separated_mixture():
    """Two well-separated bumps at -1 and +1 with standard deviation 0.1."""
    return MixtureDensity([0.5, 0.5], [_gauss(-1.0, 0.1), _gauss(1.0, 0.1)])


TARGETS = {
    "three_component_mixture": three_component_mixture,
    "four_component_mixture": four_component_mixture,
    "student_t_mixture": student_t_mixture,
    "separated_mixture": separated_mixture,
}


def get_target(spec):
    """Resolve a target given by name or by a JSON model description."""
    if isinstance(spec, str):
        return TARGETS[spec]()
    from ..density import density_from_dict

    return density_from_dict(spec)


def standard_normal(d=1):
    return GaussianDensity(np.zeros(d), np.eye(d))
