import json

import numpy as np
import pytest

from gfksd.density import (
    GaussianDensity,
    KdeDensity,
    MixtureDensity,
    StudentTDensity,
    density_from_dict,
    load_density,
    load_samples,
    save_samples,
)
from gfksd.errors import PreconditionError


def test_gaussian_specs():
    a = density_from_dict({"kind": "gaussian", "mean": [1.0], "cov": [[4.0]]})
    b = density_from_dict({"kind": "gaussian", "mean": 1.0, "variance": 4.0})
    c = density_from_dict({"kind": "gaussian", "mean": [1.0], "std": 2.0})
    x = np.array([[0.3], [2.0]])
    for m in (b, c):
        assert isinstance(m, GaussianDensity)
        np.testing.assert_allclose(m.log_density(x), a.log_density(x), rtol=1e-14)
    with pytest.raises(PreconditionError):
        density_from_dict({"kind": "gaussian", "mean": [0.0]})
    with pytest.raises(PreconditionError):
        density_from_dict({"kind": "banana"})


def test_nested_mixture_and_student_t():
    spec = {"kind": "mixture", "weights": [0.3, 0.7], "components": [
        {"kind": "gaussian", "mean": [0.0], "std": 1.0},
        {"kind": "student_t", "df": 5, "loc": 1.0, "scale": 0.5}]}
    m = density_from_dict(spec)
    assert isinstance(m, MixtureDensity) and isinstance(m.components[1], StudentTDensity)


def test_samples_round_trip_and_kde_file(tmp_path):
    pts = np.random.default_rng(0).standard_normal((25, 2))
    save_samples(tmp_path / "s.csv", pts)
    assert np.array_equal(load_samples(tmp_path / "s.csv"), pts)
    (tmp_path / "kde.json").write_text(json.dumps({"kind": "kde", "samples_csv": "s.csv"}))
    kde = load_density(tmp_path / "kde.json")
    assert isinstance(kde, KdeDensity) and kde.dim == 2
    fixed = density_from_dict({"kind": "kde", "points": pts.tolist(), "bandwidth": 0.3})
    assert isinstance(fixed, KdeDensity)
