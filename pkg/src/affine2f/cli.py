"""Command-line front end.

Subcommands wire config files and stored paths to the library:
simulate, estimate, moments, diffstats, mc-verify and limit-sample.
Every command is a pure function of (config, seed, flags); reruns
reproduce each output file byte for byte. Exit codes: 0 success,
2 config problem, 3 violated model hypotheses, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import replace

import numpy as np

from . import __version__
from .config import (
    RunConfig,
    check_seed,
    load_config,
    serialize_config,
)
from .diffusion_stats import estimate_diffusion
from .errors import Affine2FError, ConfigError
from .estimators import (
    clse_approx,
    clse_continuous,
    clse_discrete_transformed,
    gn_inverse,
)
from .experiments import ExperimentPlan, run_experiment
from .limit_laws import (
    critical_limit_batch,
    subcritical_limit,
    supercritical_limit_sample,
)
from .model import Regime, classify_regime, validate_spec
from .moments import stationary_moments, transient_moments
from .persist import draws_text, read_path_grid, write_path_grid, write_text
from .rng import RngStream
from .simulate import simulate_path

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_HYPOTHESES = 3
EXIT_NUMERICAL = 4


class _HypothesisFailure(Exception):
    """Model fails the standing assumptions of the requested operation."""


def _require(spec, purpose: str) -> None:
    report = validate_spec(spec, purpose)
    if not report.ok:
        raise _HypothesisFailure("; ".join(report.violations))


def _parse_threads(raw: str) -> None:
    # accepted for interface stability; execution is serial and results
    # are independent of this value by the determinism contract
    if raw == "auto":
        return
    try:
        n = int(raw, 10)
    except ValueError:
        raise ConfigError(
            f"--threads expects a positive integer or 'auto', got {raw!r}"
        ) from None
    if n < 1:
        raise ConfigError(f"--threads must be at least 1, got {n}")


def _effective_config(args) -> RunConfig:
    if not args.config:
        raise ConfigError("--config FILE is required for this command")
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg = replace(cfg, experiment=replace(cfg.experiment,
                                              base_seed=check_seed(args.seed)))
    if args.out is not None:
        cfg = replace(cfg, output=replace(cfg.output, directory=args.out))
    return cfg


def _prepare_out(directory: str) -> str:
    os.makedirs(directory, exist_ok=True)
    return directory


def _file_out(args) -> str:
    # estimate/diffstats read a stored path, so only --out names a target
    return _prepare_out(args.out if args.out is not None else ".")


def _sidecar_text(cfg: RunConfig, command: str, replication: int,
                  n_points: int, seed_record: str) -> str:
    lines = [
        "[provenance]",
        f"tool = affine2f {__version__}",
        f"command = {command}",
        f"replication = {replication}",
        f"seed = {seed_record}",
        f"grid_points = {n_points}",
        "",
    ]
    return "\n".join(lines) + serialize_config(cfg)


def cmd_simulate(args) -> int:
    cfg = _effective_config(args)
    spec, exp = cfg.spec, cfg.experiment
    if spec.init.kind != "point":
        # a gamma-law start only exists for an ergodic positive Y factor
        if classify_regime(spec.drift) is not Regime.SUBCRITICAL:
            raise _HypothesisFailure(
                "a stationary start requires b > 0 and gamma > 0"
            )
        if not spec.sigma1 > 0.0:
            raise _HypothesisFailure("a stationary start requires sigma1 > 0")
    _require(spec, "simulation")
    out = _prepare_out(cfg.output.directory)
    ext = {"text": "txt", "csv": "csv"}
    for r in range(exp.replications):
        path = simulate_path(spec, exp.T, exp.dt, exp.scheme,
                             RngStream(exp.base_seed, r))
        for fmt in cfg.output.formats:
            fname = os.path.join(out, "path_%03d.%s" % (r, ext[fmt]))
            write_path_grid(path, fname, fmt)
            print(f"wrote {fname}")
        meta = os.path.join(out, "path_%03d.meta" % r)
        write_text(meta, _sidecar_text(cfg, "simulate", r, len(path),
                                       path.seed_record))
        print(f"wrote {meta}")
    return EXIT_OK


def _parse_method(raw: str):
    if raw == "continuous":
        return "continuous", None
    name, colon, num = raw.partition(":")
    if colon and name in ("discrete", "approx"):
        try:
            stride = int(num, 10)
        except ValueError:
            raise ConfigError(
                f"estimator stride must be an integer, got {num!r}"
            ) from None
        if stride < 1:
            raise ConfigError(f"estimator stride must be >= 1, got {stride}")
        return name, stride
    raise ConfigError(
        "estimator must be continuous, discrete:n or approx:n, "
        f"got {raw!r}"
    )


def _estimate_text(est, te=None) -> str:
    lines = [f"source = {est.source}"]
    if est.n is not None:
        lines.append("sampling_frequency = %.17g" % est.n)
    lines.append("theta_hat = "
                 + " ".join("%.17g" % v for v in est.theta_hat))
    if te is not None:
        lines.append("transformed = " + " ".join(
            "%.17g" % v for v in (te.c, te.d, te.delta, te.epsilon, te.zeta)))
    if est.conds is not None:
        lines.append("cond_y_block = %.17g" % est.conds[0])
        lines.append("cond_x_block = %.17g" % est.conds[1])
    return "\n".join(lines) + "\n"


def cmd_estimate(args) -> int:
    method, stride = _parse_method(args.method)
    path = read_path_grid(args.path_file)
    if method == "continuous":
        est, te = clse_continuous(path), None
    else:
        te = clse_discrete_transformed(path, stride=stride)
        est = gn_inverse(te) if method == "discrete" else clse_approx(te)
    text = _estimate_text(est, te)
    out = os.path.join(_file_out(args), "estimate.txt")
    write_text(out, text)
    print(text, end="")
    print(f"wrote {out}")
    return EXIT_OK


def cmd_moments(args) -> int:
    cfg = _effective_config(args)
    if args.kmax < 0 or args.lmax < 0:
        raise ConfigError("--kmax and --lmax must be nonnegative")
    if args.when == "stationary":
        if classify_regime(cfg.spec.drift) is not Regime.SUBCRITICAL:
            raise _HypothesisFailure(
                "stationary moments require b > 0 and gamma > 0"
            )
        table = stationary_moments(cfg.spec, args.kmax, args.lmax)
    else:
        try:
            t = float(args.when)
        except ValueError:
            raise ConfigError(
                f"moment time must be 'stationary' or a number, got {args.when!r}"
            ) from None
        if t < 0.0:
            raise ConfigError(f"moment time must be nonnegative, got {t}")
        table = transient_moments(cfg.spec, t, args.kmax, args.lmax)
    text = table.to_text()
    out = os.path.join(_prepare_out(cfg.output.directory), "moments.txt")
    write_text(out, text)
    print(text, end="")
    print(f"wrote {out}")
    return EXIT_OK


def cmd_diffstats(args) -> int:
    path = read_path_grid(args.path_file)
    est = estimate_diffusion(path)
    text = est.to_text()
    out = os.path.join(_file_out(args), "diffstats.txt")
    write_text(out, text)
    print(text, end="")
    print(f"wrote {out}")
    return EXIT_OK


def cmd_mc_verify(args) -> int:
    cfg = _effective_config(args)
    spec, exp = cfg.spec, cfg.experiment
    regime = classify_regime(spec.drift)
    _require(spec, f"{regime.value}-limit")
    if args.reference_draws < 1:
        raise ConfigError("--reference-draws must be at least 1")
    plan = ExperimentPlan(spec=spec, T=exp.T, dt=exp.dt,
                          replications=exp.replications,
                          base_seed=exp.base_seed, scheme=exp.scheme)
    report = run_experiment(plan, engine=args.engine,
                            n_reference=args.reference_draws)
    text = report.to_text() + "\n"
    out = os.path.join(_prepare_out(cfg.output.directory), "mc_verify.txt")
    write_text(out, text)
    print(text, end="")
    print(f"wrote {out}")
    return EXIT_OK


def cmd_limit_sample(args) -> int:
    cfg = _effective_config(args)
    spec, exp = cfg.spec, cfg.experiment
    if args.draws < 1:
        raise ConfigError("--draws must be at least 1")
    regime = classify_regime(spec.drift)
    _require(spec, f"{regime.value}-limit")
    if regime is Regime.SUBCRITICAL:
        cov = subcritical_limit(spec).asym_cov
        root = np.linalg.cholesky(cov)
        z = RngStream(exp.base_seed, 0).generator(4).standard_normal(
            (args.draws, 5))
        draws = z @ root.T
    elif regime is Regime.CRITICAL:
        draws, _ = critical_limit_batch(
            args.draws, spec.a, spec.alpha, spec.sigma1, spec.sigma2,
            spec.rho, exp.dt, RngStream(exp.base_seed, 0))
    else:
        draws = np.empty((args.draws, 5))
        for j in range(args.draws):
            _, draws[j] = supercritical_limit_sample(
                spec, None, exp.dt, RngStream(exp.base_seed, j))
    text = draws_text(draws, f"{regime.value} limit draws")
    out = os.path.join(_prepare_out(cfg.output.directory), "limit_draws.txt")
    write_text(out, text)
    print(f"wrote {out} ({args.draws} draws)")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="FILE",
                        help="run configuration file")
    common.add_argument("--seed", type=int, metavar="U64",
                        help="override the configured base seed")
    common.add_argument("--out", metavar="DIR",
                        help="override the configured output directory")
    common.add_argument("--threads", default="auto", metavar="N|auto",
                        help="worker hint; outputs never depend on it")

    parser = argparse.ArgumentParser(
        prog="affine2f",
        description="simulation and drift inference for a two-factor "
                    "affine diffusion",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", parents=[common],
                       help="write replicated trajectories plus sidecars")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("estimate", parents=[common],
                       help="drift estimates from a stored path")
    p.add_argument("path_file")
    p.add_argument("--method", default="continuous",
                   help="continuous, discrete:n or approx:n (n = stride)")
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("moments", parents=[common],
                       help="moment table at a fixed time or at stationarity")
    p.add_argument("when", help="a time t >= 0 or the word 'stationary'")
    p.add_argument("--kmax", type=int, default=2)
    p.add_argument("--lmax", type=int, default=2)
    p.set_defaults(func=cmd_moments)

    p = sub.add_parser("diffstats", parents=[common],
                       help="diffusion statistics from a stored path")
    p.add_argument("path_file")
    p.set_defaults(func=cmd_diffstats)

    p = sub.add_parser("mc-verify", parents=[common],
                       help="replicated limit-law scorecard")
    p.add_argument("--reference-draws", type=int, default=1000)
    p.add_argument("--engine", choices=("per-path", "batched"),
                   default="per-path")
    p.set_defaults(func=cmd_mc_verify)

    p = sub.add_parser("limit-sample", parents=[common],
                       help="draws from the matching limit distribution")
    p.add_argument("--draws", type=int, default=100)
    p.set_defaults(func=cmd_limit_sample)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        _parse_threads(args.threads)
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except _HypothesisFailure as exc:
        print(f"hypothesis violation: {exc}", file=sys.stderr)
        return EXIT_HYPOTHESES
    except (Affine2FError, ValueError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
