"""Command-line front end

    andersen simulate --config run.toml        single-copy trajectory CSV
    andersen couple   --config run.toml        E[rho_t] curve CSV + meta JSON
    andersen sweep    --config run.toml        one row per swept value
    andersen check    --beta 1 --lambda-per-m 6 --m 10 --ell 1 --L 0 --J 0
    andersen selftest

Every RunConfig leaf can be overridden with --<section>.<key> VALUE.
Exit codes: 0 ok, 1 configuration error, 2 runtime failure, 3 selftest failure.
"""
import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Any, Optional, Sequence

from .config import settings
from .dynamics import simulate_andersen
from .errors import AndersenError, ConfigurationError, FitDomainError
from .harness import estimate_rho_curve, fit_decay_rate, make_sampler, sweep
from .io import (
    dump_run_config,
    load_run_config,
    write_meta_json,
    write_series_csv,
    write_sweep_csv,
    write_trajectory_csv,
)
from .metrics import WAH_BRANCH, optimal_lambda_wah, torus_params, wah_rate
from .potentials import QuadraticPotential, build_potential
from .rng import INITIAL_STREAM, replica_rng
from .schemas import (
    CouplingSection,
    DynamicsSection,
    ExperimentSection,
    OutputSection,
    QuadraticPlusConvexSpec,
    QuadraticPotentialSpec,
    RunConfig,
    SpaceSpec,
    TorusCosineSpec,
)
from .selftest import run_selftest
from .states import PhasePoint

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_RUNTIME = 2
EXIT_SELFTEST = 3


class UsageError(Exception):
    pass


class ArgumentParser(argparse.ArgumentParser):
    """argparse that raises instead of exiting, so run() controls the exit code"""

    def error(self, message):
        raise UsageError(f"{self.prog}: error: {message}\n{self.format_usage()}")


def _section_keys() -> dict[str, list[str]]:
    def keys(*models):
        out = []
        for model in models:
            for name, info in model.model_fields.items():
                key = info.alias or name
                if key not in out:
                    out.append(key)
        return out

    return {
        "space": keys(SpaceSpec),
        "potential": keys(QuadraticPotentialSpec, QuadraticPlusConvexSpec, TorusCosineSpec),
        "dynamics": keys(DynamicsSection),
        "coupling": keys(CouplingSection),
        "experiment": keys(ExperimentSection),
        "output": keys(OutputSection),
    }


def _parse_value(text: str) -> Any:
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def _add_run_options(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", type=Path, help="TOML run config or a .meta.json sidecar")
    group = parser.add_argument_group("config overrides")
    for section, keys in _section_keys().items():
        for key in keys:
            flag = f"--{section}.{key}"
            group.add_argument(flag, dest=f"override:{section}.{key}", metavar="VALUE", default=argparse.SUPPRESS)


def _overrides(args: argparse.Namespace) -> dict[str, Any]:
    return {
        dest.removeprefix("override:"): _parse_value(value)
        for dest, value in vars(args).items()
        if dest.startswith("override:")
    }


def build_parser() -> ArgumentParser:
    parser = ArgumentParser(prog="andersen", description="Andersen dynamics couplings and contraction experiments")
    parser.add_argument("--log-level", default=None, help="overrides ANDERSEN_LOG_LEVEL")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=ArgumentParser)

    for name, help_text in (
        ("simulate", "dump one single-copy trajectory"),
        ("couple", "estimate the coupling distance curve"),
        ("sweep", "sweep one parameter and tabulate the distance curve"),
    ):
        _add_run_options(sub.add_parser(name, help=help_text))

    check = sub.add_parser("check", help="print contraction rates and theorem conditions as JSON")
    check.add_argument("--config", type=Path)
    check.add_argument("--beta", type=float, default=1.0)
    lam = check.add_mutually_exclusive_group()
    lam.add_argument("--lambda", dest="lambda_", type=float)
    lam.add_argument("--lambda-per-m", type=float)
    check.add_argument("--m", type=int, default=1)
    check.add_argument("--ell", type=float, default=1.0)
    check.add_argument("--L", dest="L", type=float, default=0.0)
    check.add_argument("--J", dest="J", type=float, default=0.0)
    check.add_argument("--sigma-max", type=float, help="switch to the euclidean weakly anharmonic rate")
    check.add_argument("--L-G", dest="L_G", type=float, default=0.0)
    check.add_argument(
        "--branch", type=float, default=WAH_BRANCH, help="second-branch coefficient of the euclidean rate (default 8/5)"
    )

    sub.add_parser("selftest", help="run the built-in invariant checks")
    return parser


def _output_paths(config: RunConfig, suffix: str) -> tuple[Path, Path]:
    out_dir = config.output.dir or settings.OUTPUT_DIR
    stem = f"{config.output.prefix}{suffix}"
    return Path(out_dir) / f"{stem}.csv", Path(out_dir) / f"{stem}.meta.json"


def cmd_simulate(args) -> int:
    config = load_run_config(args.config, _overrides(args))
    seed = config.experiment.seed
    x, v, *_ = make_sampler(config)(replica_rng(seed, 0, INITIAL_STREAM))
    potential = build_potential(config.potential, config.space)
    trajectory = simulate_andersen(
        PhasePoint(x, v), potential, config.space, config.andersen_config(), replica_rng(seed, 0)
    )
    csv_path, meta_path = _output_paths(config, "_trajectory")
    write_trajectory_csv(csv_path, trajectory)
    write_meta_json(meta_path, {"config": dump_run_config(config), "master_seed": seed, "command": "simulate"})
    print(csv_path)
    return EXIT_OK


def cmd_couple(args) -> int:
    config = load_run_config(args.config, _overrides(args))
    series = estimate_rho_curve(None, config)
    meta = {**series.meta, "config": dump_run_config(config), "command": "couple"}
    try:
        fit = fit_decay_rate(series, config.experiment.fit_window)
        meta["fit"] = {"rate": fit.rate, "r_squared": fit.r_squared, "window": list(fit.window)}
        logger.info("fitted decay rate %.6g (r^2 = %.4f)", fit.rate, fit.r_squared)
    except FitDomainError as e:
        logger.warning("no decay-rate fit: %s", e)
    csv_path, meta_path = _output_paths(config, "")
    write_series_csv(csv_path, series)
    write_meta_json(meta_path, meta)
    print(csv_path)
    return EXIT_OK


def cmd_sweep(args) -> int:
    config = load_run_config(args.config, _overrides(args))
    table = sweep(config)
    csv_path, meta_path = _output_paths(config, "_sweep")
    write_sweep_csv(csv_path, table)
    write_meta_json(meta_path, {**table.meta, "config": dump_run_config(config), "command": "sweep"})
    print(csv_path)
    return EXIT_OK


def _check_from_config(path: Path) -> dict:
    config = load_run_config(path)
    space, dyn = config.space, config.dynamics
    potential = build_potential(config.potential, space)
    consts = potential.constants()
    if space.is_torus:
        return torus_params(dyn.beta, dyn.lambda_, space.m, space.ell, consts.L or 0.0, consts.J or 0.0).as_dict()
    if not isinstance(potential, QuadraticPotential):
        raise ConfigurationError("check needs a torus space or a quadratic potential")
    return _wah_report(dyn.lambda_, space.m, consts.sigma_max, consts.L_G or 0.0, potential.c_inv)


def _wah_report(
    lambda_: float, m: int, sigma_max: float, L_G: float, c_inv=None, branch: float = WAH_BRANCH
) -> dict:
    rate = wah_rate(lambda_, m, sigma_max, L_G, c_inv, branch)
    lam_star, c_star = optimal_lambda_wah(m, sigma_max, L_G, branch)
    return {
        "lambda": lambda_,
        "branch": branch,
        "m": m,
        "sigma_max": sigma_max,
        "L_G": L_G,
        **rate.as_dict(),
        "lambda_star": lam_star,
        "c_star": c_star,
    }


def cmd_check(args) -> int:
    if args.config is not None:
        report = _check_from_config(args.config)
    else:
        if args.lambda_ is None and args.lambda_per_m is None:
            raise ConfigurationError("check needs --lambda, --lambda-per-m or --config")
        lam = args.lambda_ if args.lambda_ is not None else args.lambda_per_m * args.m
        if args.sigma_max is not None:
            report = _wah_report(lam, args.m, args.sigma_max, args.L_G, branch=args.branch)
        else:
            report = torus_params(args.beta, lam, args.m, args.ell, args.L, args.J).as_dict()
    print(json.dumps(report, indent=2, sort_keys=True))
    return EXIT_OK


def cmd_selftest(args) -> int:
    results = run_selftest()
    for r in results:
        print(f"{'ok  ' if r.ok else 'FAIL'} {r.name}{'' if r.ok else ': ' + r.detail}")
    return EXIT_OK if all(r.ok for r in results) else EXIT_SELFTEST


COMMANDS = {
    "simulate": cmd_simulate,
    "couple": cmd_couple,
    "sweep": cmd_sweep,
    "check": cmd_check,
    "selftest": cmd_selftest,
}


def run(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as e:
        print(e, file=sys.stderr)
        return EXIT_CONFIG
    except SystemExit as e:
        # --help
        return int(e.code or 0)

    logging.basicConfig(
        level=(args.log_level or settings.LOG_LEVEL).upper(),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    try:
        return COMMANDS[args.command](args)
    except ConfigurationError as e:
        print(f"Configuration error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except AndersenError as e:
        print(f"Run failed: {e}", file=sys.stderr)
        return EXIT_RUNTIME


def main() -> None:
    sys.exit(run())
