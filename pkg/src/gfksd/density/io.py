"""JSON model descriptions and CSV sample files."""

import json
from pathlib import Path

import numpy as np

from ..errors import PreconditionError
from .models import GaussianDensity, KdeDensity, MixtureDensity, StudentTDensity


def density_from_dict(spec, base_dir=None):
    """Build a density from a dict such as ``{"kind": "gaussian", "mean": [0], "cov": [[1]]}``.

    Supported kinds: ``gaussian`` (``mean`` with one of ``cov``, ``variance``,
    ``std``), ``student_t`` (``df``, ``loc``, ``scale``), ``mixture``
    (``weights``, ``components``), ``kde`` (``points`` or ``samples_csv``,
    optional ``bandwidth``).
    """
    kind = spec.get("kind")
    if kind == "gaussian":
        mean = np.atleast_1d(np.asarray(spec["mean"], dtype=float))
        if "cov" in spec:
            cov = spec["cov"]
        elif "variance" in spec:
            cov = spec["variance"]
        elif "std" in spec:
            cov = np.asarray(spec["std"], dtype=float) ** 2
        else:
            raise PreconditionError("gaussian model needs 'cov', 'variance' or 'std'")
        return GaussianDensity(mean, cov)
    if kind == "student_t":
        return StudentTDensity(spec["df"], spec.get("loc", 0.0), spec.get("scale", 1.0))
    if kind == "mixture":
        comps = [density_from_dict(c, base_dir) for c in spec["components"]]
        return MixtureDensity(spec["weights"], comps)
    if kind == "kde":
        if "points" in spec:
            pts = np.asarray(spec["points"], dtype=float)
        else:
            path = Path(spec["samples_csv"])
            if base_dir is not None and not path.is_absolute():
                path = Path(base_dir) / path
            pts = load_samples(path)
        if "bandwidth" in spec:
            return KdeDensity(pts, spec["bandwidth"])
        from .fit import fit_kde

        return fit_kde(pts)
    raise PreconditionError(f"unknown density kind {kind!r}")


def load_density(path):
    """Read a JSON model description from ``path``."""
    path = Path(path)
    with open(path) as fh:
        spec = json.load(fh)
    return density_from_dict(spec, base_dir=path.parent)


def load_samples(path):
    """Load a headerless CSV (one row per point) as an ``(n, d)`` array."""
    return np.loadtxt(path, delimiter=",", ndmin=2)


def save_samples(path, points):
    np.savetxt(path, np.asarray(points, dtype=float), delimiter=",", fmt="%.17g")
