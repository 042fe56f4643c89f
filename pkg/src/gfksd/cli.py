"""Command-line entry point: ``gfksd <subcommand> [options]``.

Exit codes: 0 success, 2 configuration error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .density import GaussianDensity, fit_laplace, load_density, load_samples
from .errors import (
    DimensionMismatchError,
    GfksdError,
    PreconditionError,
    UnsupportedOperationError,
)
from .kernel import ImqKernel
from .sampling import stein_importance_sample
from .varinf import AffineTransport, TemperingSchedule, fit_transport

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3

log = logging.getLogger("gfksd")


class ConfigError(Exception):
    """Bad command-line input or configuration file."""


def _read_json(path):
    try:
        with open(path) as fh:
            return json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path} is not valid JSON: {exc}") from exc


def _load_target(spec):
    from .experiments.targets import TARGETS

    if spec in TARGETS:
        return TARGETS[spec]()
    if not Path(spec).exists():
        raise ConfigError(f"target {spec!r} is neither a model file nor one of {sorted(TARGETS)}")
    try:
        return load_density(spec)
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"invalid model description in {spec}: {exc}") from exc


def _out_dir(args):
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_json(path, payload):
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True, default=_jsonable)
        fh.write("\n")


def _jsonable(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    return str(obj)


def _kernel(cfg):
    return ImqKernel(cfg.get("sigma", 1.0), cfg.get("beta", 0.5))


# -- subcommands ----------------------------------------------------------------

def cmd_convergence_study(args):
    from .experiments.convergence import load_config, make_sequences, run_convergence_study, summarize
    from .experiments.targets import get_target

    cfg = _read_json(args.config) if args.config else load_config("convergence")
    if args.length is not None:
        cfg["length"] = args.length
    if args.m is not None:
        cfg["m"] = args.m
    std = args.standardization or cfg.get("standardization", "inverse")
    target_spec = args.target or cfg.get("target", "three_component_mixture")
    target = _load_target(target_spec) if isinstance(target_spec, str) else get_target(target_spec)
    seqs = make_sequences(cfg, target)
    out = _out_dir(args)
    summary = {}
    for strategy in args.strategy:
        report = run_convergence_study(target, strategy, seqs, m=int(cfg.get("m", 300)),
                                       kernel=_kernel(cfg), standardization=std, config=cfg,
                                       seed=args.seed)
        report.to_csv(out / f"convergence_{strategy}.csv")
        report.metadata["summary"] = summarize(report)
        report.to_json(out / f"convergence_{strategy}.json")
        summary[strategy] = report.metadata["summary"]
    print(json.dumps(summary, indent=2, sort_keys=True))


def cmd_failure_mode(args):
    from .experiments.convergence import load_config
    from .experiments.failure_modes import run_failure_modes

    cfg = _read_json(args.config) if args.config else load_config("failure_modes")
    report = run_failure_modes(args.mode, cfg, seed=args.seed)
    out = _out_dir(args)
    report.to_csv(out / f"failure_{args.mode}.csv")
    report.to_json(out / f"failure_{args.mode}.json")
    print(f"wrote {len(report.rows)} rows to {out / f'failure_{args.mode}.csv'}")


def cmd_lv_demo(args):
    from .experiments.lotka_volterra import LotkaVolterraModel, run_lv_demo

    model = LotkaVolterraModel.hudson_bay(args.data) if args.data else LotkaVolterraModel.hudson_bay()
    reference = _samples(args.reference) if args.reference else None
    cmp, report = run_lv_demo(args.n, args.seed, reference=reference, model=model,
                              standardize=not args.no_standardize)
    out = _out_dir(args)
    cmp.stein_weighted.to_csv(out / "lv_stein_weights.csv")
    cmp.snis_weighted.to_csv(out / "lv_snis_weights.csv")
    report.to_csv(out / "lv_report.csv")
    report.to_json(out / "lv_summary.json")
    print(json.dumps(cmp.summary(), default=_jsonable))


def _samples(path):
    try:
        return load_samples(path)
    except OSError as exc:
        raise ConfigError(f"cannot read samples from {path}") from exc
    except ValueError as exc:
        raise ConfigError(f"malformed sample file {path}: {exc}") from exc


def cmd_stein_is(args):
    cfg = _read_json(args.config) if args.config else {}
    p = _load_target(args.target)
    if args.surrogate == "laplace":
        init = cfg.get("laplace_init", np.zeros(p.dim))
        q = fit_laplace(p, init)
    else:
        q = _load_target(args.surrogate)
    if not isinstance(q, GaussianDensity) and args.standardize:
        raise ConfigError("standardisation needs a Gaussian surrogate")
    reference = _samples(args.reference) if args.reference else None
    cmp = stein_importance_sample(p, q, _kernel(cfg), n=args.n, rng_seed=args.seed,
                                  reference=reference, standardize=args.standardize)
    out_csv = Path(args.out) if args.out else _out_dir(args) / "weights.csv"
    out_csv.parent.mkdir(parents=True, exist_ok=True)
    cmp.stein_weighted.to_csv(out_csv)
    summary = cmp.summary()
    _write_json(out_csv.with_suffix(".json"), summary)
    print(json.dumps(summary, default=_jsonable))


def _read_schedule(path):
    try:
        eps = np.loadtxt(path, delimiter=",", ndmin=1).ravel()
    except OSError as exc:
        raise ConfigError(f"cannot read schedule {path}") from exc
    except ValueError as exc:
        raise ConfigError(f"malformed schedule {path}: {exc}") from exc
    return eps


def cmd_stein_vi(args):
    cfg = _read_json(args.config) if args.config else {}
    p = _load_target(args.target)
    d = p.dim
    if args.schedule:
        eps = _read_schedule(args.schedule)
    else:
        eps = np.zeros(1)
    iters = args.iters if args.iters is not None else eps.size
    if iters < 1:
        raise ConfigError("--iters must be positive")
    # pad with the final tempering weight or truncate to the requested length
    eps = np.concatenate([eps, np.full(max(iters - eps.size, 0), eps[-1])])[:iters]
    p0 = GaussianDensity(np.zeros(d), cfg.get("p0_variance", 2.0) * np.eye(d))
    if args.p0:
        p0 = _load_target(args.p0)
    try:
        schedule = TemperingSchedule(eps, p0)
    except PreconditionError as exc:
        raise ConfigError(str(exc)) from exc
    reference = GaussianDensity(np.zeros(d), np.eye(d))
    fit = fit_transport(p, schedule, reference, AffineTransport.identity(d),
                        step=args.step if args.step is not None else cfg.get("step", 1e-3),
                        clip_norm=cfg.get("clip_norm", 30.0),
                        batch_n=args.batch if args.batch is not None else cfg.get("batch_n", 64),
                        seed=args.seed, kernel=_kernel(cfg))
    out_csv = Path(args.out) if args.out else _out_dir(args) / "vi_trace.csv"
    out_csv.parent.mkdir(parents=True, exist_ok=True)
    fit.trace_to_csv(out_csv)
    summary = {"scale": fit.transport.scale.tolist(), "shift": fit.transport.shift.tolist(),
               "final_objective": float(fit.trace[-1, 1]), "iterations": int(iters)}
    _write_json(out_csv.with_suffix(".json"), summary)
    print(json.dumps(summary))


# -- parser -----------------------------------------------------------------------

def _common(suppress):
    # global flags are accepted before or after the subcommand; the subcommand
    # copies must not overwrite values given at the top level
    kw = {"default": argparse.SUPPRESS} if suppress else {}
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, help="RNG seed (default 0)", **(kw or {"default": 0}))
    common.add_argument("--out-dir", help="directory for CSV/JSON outputs",
                        **(kw or {"default": "gfksd_out"}))
    common.add_argument("--config", help="JSON configuration file", **(kw or {"default": None}))
    common.add_argument("-v", "--verbose", action="store_true", **kw)
    return common


def build_parser():
    common = _common(suppress=True)
    parser = argparse.ArgumentParser(prog="gfksd", parents=[_common(suppress=False)],
                                     description="Gradient-free kernel Stein discrepancy tools.")
    sub = parser.add_subparsers(dest="command", required=True)

    s = sub.add_parser("convergence-study", parents=[common],
                       help="GF-KSD along converging and non-converging sequences")
    s.add_argument("--target", help="target name or model JSON (default from config)")
    s.add_argument("--strategy", nargs="+", default=["laplace"],
                   choices=["prior", "laplace", "gmm", "kde", "oracle"])
    s.add_argument("--m", type=int, help="QMC points per sequence element")
    s.add_argument("--length", type=int, help="sequence length")
    s.add_argument("--standardization", choices=["none", "inverse", "whiten"])
    s.set_defaults(func=cmd_convergence_study)

    s = sub.add_parser("failure-mode", parents=[common], help="run one documented failure mode")
    s.add_argument("--mode", required=True,
                   choices=["heavy_q", "light_q", "dimension", "separation", "dirac_escape"])
    s.set_defaults(func=cmd_failure_mode)

    s = sub.add_parser("lv-demo", parents=[common], help="Stein importance sampling, Lotka-Volterra")
    s.add_argument("--n", type=int, default=20)
    s.add_argument("--reference", help="headerless CSV of reference posterior samples (theta scale)")
    s.add_argument("--data", help="alternative hare-lynx CSV")
    s.add_argument("--no-standardize", action="store_true")
    s.set_defaults(func=cmd_lv_demo)

    s = sub.add_parser("stein-is", parents=[common], help="gradient-free Stein importance sampling")
    s.add_argument("--target", required=True, help="target model JSON or bundled target name")
    s.add_argument("--surrogate", default="laplace", help="surrogate model JSON or 'laplace'")
    s.add_argument("--n", type=int, default=100)
    s.add_argument("--out", help="weights CSV (summary JSON written alongside)")
    s.add_argument("--reference", help="headerless CSV of target samples for energy distances")
    s.add_argument("--standardize", action="store_true", help="evaluate after x -> C^{-1} x")
    s.set_defaults(func=cmd_stein_is)

    s = sub.add_parser("stein-vi", parents=[common], help="affine transport fit by GF-KSD descent")
    s.add_argument("--target", required=True)
    s.add_argument("--schedule", help="CSV of tempering weights (default: no tempering)")
    s.add_argument("--iters", type=int, help="iterations (schedule padded with its last value)")
    s.add_argument("--p0", help="tempering base model JSON (default N(0, 2I))")
    s.add_argument("--step", type=float)
    s.add_argument("--batch", type=int)
    s.add_argument("--out", help="trace CSV (summary JSON written alongside)")
    s.set_defaults(func=cmd_stein_vi)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (PreconditionError, DimensionMismatchError, UnsupportedOperationError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except GfksdError as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (KeyError, FileNotFoundError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
