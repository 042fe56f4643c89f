"""Documented pathologies of the gradient-free KSD, as runnable scenarios."""

from __future__ import annotations

import numpy as np

from ..density import GaussianDensity
from ..discrepancy import ParticleMeasure, gfksd_squared
from ..errors import PreconditionError
from ..kernel import ImqKernel
from .convergence import discrepancy_curve, load_config, sequence_id
from .report import ExperimentReport, config_hash
from .sequences import LocationScaleSequence
from .targets import separated_mixture, three_component_mixture

MODES = ("heavy_q", "light_q", "dimension", "separation", "dirac_escape")


def _gauss1(spec):
    return GaussianDensity([spec["mean"]], [[spec["std"] ** 2]])


def _sequences(entries, base, length, decay, converging):
    return [LocationScaleSequence.from_config(dict(e, converging=converging, decay=decay), base, length)
            for e in entries]


def dirac_escape_bound(n, p_variance, q_variance, kernel):
    """Analytic value of D(delta(n))^2 for q = N(0, s_q^2), p = N(0, s_p^2) in 1D.

    The squared ratio is ``(s_p^2 / s_q^2) exp(-gamma n^2)`` with
    ``gamma = 1/s_q^2 - 1/s_p^2`` and the diagonal identity gives
    ``k_q(n, n) = -lap phi(0) + phi(0) n^2 / s_q^4``.  For s_q = 1 this is
    ``s_p^2 exp(-gamma n^2) (-lap phi(0) + phi(0) n^2)``.
    """
    n = np.asarray(n, dtype=float)
    gamma = 1.0 / q_variance - 1.0 / p_variance
    s2, b = kernel.sigma**2, kernel.beta
    lap = 2.0 * b * s2 ** (-(b + 1.0))
    phi0 = s2 ** (-b)
    scale = p_variance / q_variance
    return scale * np.exp(-gamma * n * n) * (lap + phi0 * n * n / q_variance**2)


def _curves(report, p, q, seqs, m, kernel, standardization, label, seed, **extra):
    for seq in seqs:
        vals = discrepancy_curve(p, q, seq, m, kernel, standardization, seed)
        for n, v in enumerate(vals):
            report.add(sequence_id(seq), n + 1, v, label, kernel.sigma, kernel.beta, **extra)


def run_failure_modes(mode, config=None, seed=0, kernel=None):
    """GF-KSD curves illustrating one failure mode.

    ``config`` is the full failure-mode config (defaults to the shipped one);
    the section named ``mode`` holds the scenario's settings.
    """
    if mode not in MODES:
        raise PreconditionError(f"unknown failure mode {mode!r}; expected one of {MODES}")
    config = config if config is not None else load_config("failure_modes")
    kernel = kernel or ImqKernel(config.get("sigma", 1.0), config.get("beta", 0.5))
    cfg = config.get(mode, {})
    decay = config.get("decay", 1e-3)
    std_mode = config.get("standardization", "inverse")
    report = ExperimentReport(metadata={
        "mode": mode,
        "seed": seed,
        "standardization": std_mode,
        "config_hash": config_hash({"config": cfg, "seed": seed, "sigma": kernel.sigma,
                                    "beta": kernel.beta, "standardization": std_mode}),
    })
    length = int(cfg.get("length", 300))
    m = int(cfg.get("m", 300))

    if mode == "heavy_q":
        p = three_component_mixture()
        q = _gauss1(cfg.get("q", {"mean": 0.0, "std": 1.5}))
        seqs = _sequences(cfg.get("converging", []), p, length, decay, True)
        _curves(report, p, q, seqs, m, kernel, std_mode, "heavy_q", seed)

    elif mode == "light_q":
        p = _gauss1(cfg.get("p", {"mean": 0.0, "std": 1.0}))
        q = _gauss1(cfg.get("q", {"mean": -0.7, "std": 0.1}))
        seqs = _sequences(cfg.get("converging", []), p, length, decay, True)
        _curves(report, p, q, seqs, m, kernel, std_mode, "light_q", seed)

    elif mode == "dimension":
        for d in cfg.get("dims", [1, 2, 30]):
            p = GaussianDensity(np.zeros(d), np.eye(d))
            q = GaussianDensity(np.zeros(d), cfg.get("q_variance", 1.1) * np.eye(d))
            seqs = _sequences(cfg.get("converging", []), p, length, decay, True)
            for seq in seqs:
                seq.name = f"{seq.name}_d{d}"
            _curves(report, p, q, seqs, m, kernel, std_mode, "dimension", seed, dim=d)

    elif mode == "separation":
        p = separated_mixture()
        impostor = _gauss1(cfg.get("impostor", {"mean": 1.0, "std": 0.1}))
        seqs = (_sequences(cfg.get("converging", []), p, length, decay, True)
                + _sequences(cfg.get("non_converging", []), impostor, length, decay, False))
        _curves(report, p, p, seqs, m, kernel, std_mode, "separation", seed)

    else:
        pv = float(cfg.get("p_variance", 4.0))
        qv = float(cfg.get("q_variance", 1.0))
        p = GaussianDensity([0.0], [[pv]])
        q = GaussianDensity([0.0], [[qv]])
        for n in range(1, int(cfg.get("n_max", 10)) + 1):
            res = gfksd_squared(p, q, kernel, ParticleMeasure.uniform([[float(n)]]))
            report.add("dirac", n, res.value, "dirac_escape", kernel.sigma, kernel.beta,
                       value_squared=res.value_squared,
                       bound=float(dirac_escape_bound(n, pv, qv, kernel)))
    return report
