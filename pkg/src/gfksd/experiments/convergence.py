"""Convergence-detection study: GF-KSD along location-scale sequences."""

from __future__ import annotations

import json
from importlib import resources

import numpy as np

from ..density import GaussianDensity, KdeDensity, MixtureDensity, fit_gmm, fit_kde, fit_laplace
from ..discrepancy import ParticleMeasure, gfksd_squared, standardize
from ..errors import GfksdError, PreconditionError
from ..kernel import ImqKernel
from ..sampling import make_rng
from .report import ExperimentReport, config_hash
from .sequences import LocationScaleSequence
from .targets import get_target

STRATEGIES = ("prior", "laplace", "gmm", "kde", "oracle")
STANDARDIZATIONS = ("none", "inverse", "whiten")


def load_config(name_or_path="convergence"):
    """Load a shipped config by name, or any JSON file by path."""
    if str(name_or_path).endswith(".json"):
        with open(name_or_path) as fh:
            return json.load(fh)
    text = resources.files("gfksd.experiments").joinpath(f"configs/{name_or_path}.json").read_text()
    return json.loads(text)


def model_covariance(model):
    """Covariance of a Gaussian, Gaussian mixture or KDE surrogate."""
    if isinstance(model, GaussianDensity):
        return model.covariance
    if isinstance(model, KdeDensity):
        pts = model.points
        return np.atleast_2d(np.cov(pts, rowvar=False, ddof=0)) + np.diag(model.kernel_std**2)
    if isinstance(model, MixtureDensity):
        means = [np.atleast_1d(c.mean) for c in model.components]
        covs = [model_covariance(c) for c in model.components]
        w = model.weights
        mu = sum(wi * m for wi, m in zip(w, means))
        second = sum(wi * (c + np.outer(m, m)) for wi, m, c in zip(w, means, covs))
        return second - np.outer(mu, mu)
    raise PreconditionError(f"no covariance available for {type(model).__name__}")


def build_surrogate(strategy, target, config=None, seed=0):
    """The q of a given strategy; gmm and kde consume target samples."""
    config = config or {}
    if strategy == "oracle":
        return target
    if strategy == "prior":
        prior = config.get("prior", {"mean": 0.0, "std": 0.75})
        return GaussianDensity(np.full(target.dim, prior["mean"]), prior["std"] ** 2 * np.eye(target.dim))
    if strategy == "laplace":
        init = config.get("laplace_init", np.zeros(target.dim))
        return fit_laplace(target, init)
    if strategy in ("gmm", "kde"):
        samples = target.sample(make_rng(seed), int(config.get("n_target_samples", 100)))
        if strategy == "gmm":
            return fit_gmm(samples, int(config.get("gmm_max_components", 5)), rng=make_rng(seed + 1))
        return fit_kde(samples)
    raise PreconditionError(f"unknown q strategy {strategy!r}; expected one of {STRATEGIES}")


def make_sequences(config, target):
    """Converging sequences on ``target`` and non-converging ones on a fixed Gaussian."""
    length = int(config.get("length", 300))
    decay = config.get("decay", 1e-3)
    nc = config.get("non_converging_base", {"mean": 0.0, "variance": 0.5})
    wrong = GaussianDensity(np.full(target.dim, nc["mean"]), nc["variance"] * np.eye(target.dim))
    seqs = []
    for cfg in config.get("converging", []):
        seqs.append(LocationScaleSequence.from_config(dict(cfg, converging=True, decay=decay), target, length))
    for cfg in config.get("non_converging", []):
        seqs.append(LocationScaleSequence.from_config(dict(cfg, converging=False, decay=decay), wrong, length))
    return seqs


def _tag(exc, prefix):
    exc.args = (f"{prefix} {exc.args[0] if exc.args else ''}",) + exc.args[1:]


def sequence_id(seq):
    return f"{seq.direction}:{seq.name}"


def discrepancy_curve(p, q, seq, m, kernel=None, standardization="inverse", seed=0):
    """GF-KSD of every element of ``seq`` (each discretised by ``m`` QMC points)."""
    if standardization not in STANDARDIZATIONS:
        raise PreconditionError(f"standardization must be one of {STANDARDIZATIONS}")
    kernel = kernel or ImqKernel()
    base = seq.base_particles(m, seed)
    pz, qz = p, q
    std = None
    if standardization != "none":
        std = standardize(model_covariance(q), np.zeros((1, q.dim)), whiten=standardization == "whiten")
        pz, qz = std.density(p), std.density(q)
    out = np.empty(len(seq))
    for n in range(len(seq)):
        pts = seq.element(n, base).points
        if std is not None:
            pts = std.forward(pts)
        try:
            out[n] = gfksd_squared(pz, qz, kernel, ParticleMeasure.uniform(pts)).value
        except GfksdError as exc:
            _tag(exc, f"[n={n + 1}]")
            raise
    return out


def run_convergence_study(target, q_strategy, sequences, m=300, kernel=None,
                          standardization="inverse", config=None, seed=0, q=None):
    """GF-KSD along each sequence for one surrogate strategy.

    ``target`` is a density or a target name; ``q`` overrides the strategy's
    surrogate.  Failures are re-raised tagged with (strategy, sequence, n).
    """
    if isinstance(target, (str, dict)):
        target = get_target(target)
    if target.dim != 1:
        raise PreconditionError("the convergence study needs a one-dimensional target")
    kernel = kernel or ImqKernel()
    try:
        q = q if q is not None else build_surrogate(q_strategy, target, config, seed)
    except GfksdError as exc:
        _tag(exc, f"[{q_strategy}] surrogate construction failed")
        raise
    meta = {
        "seed": seed,
        "q_strategy": q_strategy,
        "m": m,
        "standardization": standardization,
        "config_hash": config_hash({"config": config, "m": m, "seed": seed,
                                    "standardization": standardization,
                                    "sigma": kernel.sigma, "beta": kernel.beta}),
    }
    if getattr(q, "info", None):
        meta["surrogate_info"] = {k: v for k, v in q.info.items() if np.isscalar(v)}
    report = ExperimentReport(metadata=meta)
    for seq in sequences:
        sid = sequence_id(seq)
        try:
            vals = discrepancy_curve(target, q, seq, m, kernel, standardization, seed)
        except GfksdError as exc:
            _tag(exc, f"[{q_strategy}, {sid}]")
            raise
        for n, v in enumerate(vals):
            report.add(sid, n + 1, v, q_strategy, kernel.sigma, kernel.beta)
    return report


def summarize(report, q_strategy=None):
    """First, final and max value of every sequence, plus the replication verdict."""
    out = {}
    for sid in report.sequences():
        _, vals = report.series(sid, q_strategy)
        vals = np.asarray(vals)
        first, final, peak = vals[0], vals[-1], vals.max()
        if sid.startswith("converging"):
            ok = bool(final < 0.1 * first)
        else:
            ok = bool(final > 0.5 * peak)
        out[sid] = {"first": float(first), "final": float(final), "max": float(peak), "ok": ok}
    return out
