#!/usr/bin/env python3
"""
Main entry point for confidence-set robust learning.

Commands write JSON (or CSV) to stdout and files; logs go to stderr.
Exit codes: 0 success, 2 input or validation error, 3 numerical failure.
"""

import argparse
import logging
import sys
from pathlib import Path
from typing import Dict, List, Optional

import numpy as np

from . import config
from .confidence import binary_interval, epsilon_bits, simulate_coverage
from .evaluate import risk_curves, run_experiment
from .exceptions import DataError, SolverError
from .inner_solver import ExcessProfile, solve_least_favorable
from .optimize import fit
from .settings import (
    CoverageConfig,
    CurvesConfig,
    ExperimentConfig,
    FitConfig,
    GenConfig,
    IntervalConfig,
    SolveInnerConfig,
    resolve,
)
from .synthetic import make_generator
from .utils.environment import print_environment
from .utils.io import dumps_json, read_dataset_csv, read_json, write_config_sidecar, write_csv, write_dataset_csv, write_json

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_DATA_ERROR = 2
EXIT_SOLVER_ERROR = 3


def _emit(data: Dict):
    print(dumps_json(data))


def _float_list(text: Optional[str]) -> Optional[List[float]]:
    if text is None:
        return None
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as e:
        raise DataError(f"expected a comma-separated list of numbers, got '{text}'") from e


def cmd_fit(args) -> int:
    """Fit ERM, group DRO or the robust model to a dataset CSV"""
    flags = {
        "data": args.data,
        "loss": {"name": args.loss} if args.loss else None,
        "method": args.method,
        "beta": args.beta,
        "out": args.out,
        "optimizer": {k: v for k, v in (("step_size", args.step_size), ("max_iters", args.max_iters)) if v is not None} or None,
    }
    cfg = resolve(FitConfig, args.config, flags, args.set)

    dataset = read_dataset_csv(cfg.data)
    loss = cfg.loss.build()
    result = fit(cfg.method, loss, dataset, cfg.beta, cfg.optimizer, cfg.group_dro)
    result.config = cfg.model_dump(mode="json")
    output = result.to_json()

    if cfg.out:
        write_json(output, cfg.out)
        write_config_sidecar(cfg.out, result.config)
        logger.info(f"Fit written to {cfg.out}")
    _emit(output)
    return EXIT_OK


def cmd_solve_inner(args) -> int:
    """Solve the inner maximization for a JSON excess profile"""
    profile_data = read_json(args.profile) if args.profile else {}
    flags = {
        "profile": args.profile,
        "eps_bits": args.eps if args.eps is not None else profile_data.get("eps_bits"),
        "beta": args.beta,
        "n": args.n,
        "contexts": args.contexts,
    }
    cfg = resolve(SolveInnerConfig, args.config, flags, args.set)
    if not profile_data:
        profile_data = read_json(cfg.profile)
    if "phat" not in profile_data or "deltas" not in profile_data:
        raise DataError(f"profile {cfg.profile} needs 'phat' and 'deltas'")

    profile = ExcessProfile.build(profile_data["phat"], profile_data["deltas"], profile_data.get("rhats"))
    if cfg.eps_bits is not None:
        eps = cfg.eps_bits
    else:
        eps = epsilon_bits(cfg.n, cfg.contexts or profile.phat.size, cfg.beta)

    lf = solve_least_favorable(profile, eps)
    output = lf.to_dict()
    output["config"] = cfg.model_dump(mode="json")
    _emit(output)
    return EXIT_OK


def cmd_coverage(args) -> int:
    """Simulate the coverage of the confidence set"""
    flags = {
        "p": _float_list(args.p),
        "n": args.n,
        "beta": args.beta,
        "trials": args.trials,
        "seed": args.seed,
        "workers": args.workers,
    }
    cfg = resolve(CoverageConfig, args.config, flags, args.set)
    coverage = simulate_coverage(cfg.p, cfg.n, cfg.beta, cfg.trials, cfg.seed, cfg.workers)
    eps = epsilon_bits(cfg.n, len(cfg.p), cfg.beta)
    _emit(
        {
            "coverage": coverage,
            "trials": cfg.trials,
            "beta": cfg.beta,
            "n": cfg.n,
            "eps_bits": eps if np.isfinite(eps) else None,
            "config": cfg.model_dump(mode="json"),
        }
    )
    return EXIT_OK


def cmd_experiment(args) -> int:
    """Run a Monte Carlo experiment comparing methods"""
    flags = {
        "name": args.name,
        "runs": args.runs,
        "beta": args.beta,
        "seed": args.seed,
        "m": args.m,
        "workers": args.workers,
        "methods": args.methods.split(",") if args.methods else None,
        "out": args.out,
    }
    cfg = resolve(ExperimentConfig, args.config, flags, args.set)
    summary = run_experiment(cfg)
    output = summary.model_dump(mode="json")

    if cfg.out:
        out_dir = Path(cfg.out)
        out_dir.mkdir(parents=True, exist_ok=True)
        write_csv(summary.rows(), out_dir / "runs.csv")
        write_json(output, out_dir / "summary.json")
        write_config_sidecar(out_dir / "summary.json", summary.config)
        logger.info(f"Experiment results written to {out_dir}")
    _emit(output)

    if summary.succeeded < config.MIN_SUCCESS_FRACTION * cfg.runs:
        logger.error(f"Only {summary.succeeded} of {cfg.runs} runs succeeded")
        return EXIT_SOLVER_ERROR
    return EXIT_OK


def cmd_gen(args) -> int:
    """Generate a synthetic dataset CSV with a metadata sidecar"""
    params = {}
    if args.seed is not None:
        params["seed"] = args.seed
    if args.n is not None:
        params["n"] = args.n
    flags = {"name": args.name, "params": params or None, "out": args.out}
    cfg = resolve(GenConfig, args.config, flags, args.set)

    generator = make_generator(cfg.name, cfg.params)
    dataset = generator.generate()
    resolved = cfg.model_dump(mode="json")
    resolved["params"] = generator.cfg.model_dump(mode="json")

    if cfg.out:
        write_dataset_csv(dataset, cfg.out)
        write_config_sidecar(cfg.out, {"config": resolved, "metadata": dict(dataset.metadata)})
        _emit({"out": cfg.out, "n": dataset.n, "counts": dataset.counts.tolist(), "config": resolved})
    else:
        write_dataset_csv(dataset, sys.stdout)
    return EXIT_OK


def cmd_curves(args) -> int:
    """Tabulate risks and worst-case objectives along a parameter grid"""
    flags = {
        "data": args.data,
        "loss": {"name": args.loss} if args.loss else None,
        "betas": args.beta,
        "theta_min": args.theta_min,
        "theta_max": args.theta_max,
        "theta_steps": args.theta_steps,
        "out": args.out,
    }
    cfg = resolve(CurvesConfig, args.config, flags, args.set)
    dataset = read_dataset_csv(cfg.data)
    loss = cfg.loss.build()

    theta_max = cfg.theta_max
    if theta_max is None:
        upper = float(loss.bounds(dataset.d)[1][0])
        if not np.isfinite(upper):
            raise DataError("--theta-max is required for losses without an upper bound")
        theta_max = upper
    grid = np.linspace(cfg.theta_min, theta_max, cfg.theta_steps)
    table = risk_curves(loss, dataset, grid, cfg.betas)

    if cfg.out:
        write_csv(table, cfg.out)
        write_config_sidecar(cfg.out, cfg.model_dump(mode="json"))
        _emit({"out": cfg.out, "rows": len(table), "config": cfg.model_dump(mode="json")})
    else:
        write_csv(table, sys.stdout)
    return EXIT_OK


def cmd_interval(args) -> int:
    """Two-context confidence interval for p1"""
    flags = {"phat1": args.phat1, "n": args.n, "beta": args.beta}
    cfg = resolve(IntervalConfig, args.config, flags, args.set)
    lower, upper = binary_interval(cfg.phat1, cfg.n, cfg.beta)
    eps = epsilon_bits(cfg.n, 2, cfg.beta)
    _emit(
        {
            "lower": lower,
            "upper": upper,
            "eps_bits": eps if np.isfinite(eps) else None,
            "config": cfg.model_dump(mode="json"),
        }
    )
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ctx-robust",
        description="Robust learning over KL confidence sets of context distributions",
    )
    parser.add_argument("--info", action="store_true", help="Show system information and exit")
    parser.add_argument(
        "--log-level",
        choices=["DEBUG", "INFO", "WARNING", "ERROR"],
        default=None,
        help=f"Logging level (default: {config.LOG_LEVEL})",
    )

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=str, help="JSON config file (flags override its values)")
    common.add_argument(
        "--set", action="append", default=[], metavar="KEY=VALUE", help="Override a config value, e.g. optimizer.max_iters=1000"
    )

    sub = parser.add_subparsers(dest="command")

    p = sub.add_parser("fit", parents=[common], help="Fit a model to a dataset CSV")
    p.add_argument("--data", type=str, help="Dataset CSV (context,x1,...,xd,y)")
    p.add_argument("--loss", choices=["newsvendor", "logistic"], help="Loss name")
    p.add_argument("--beta", type=float, help=f"Confidence level (default: {config.DEFAULT_BETA})")
    p.add_argument("--method", choices=["erm", "minimax", "robust"], help="Fitting method (default: robust)")
    p.add_argument("--step-size", type=float, help="Base step size")
    p.add_argument("--max-iters", type=int, help="Iteration cap")
    p.add_argument("--out", type=str, help="Write the FitResult JSON here")
    p.set_defaults(handler=cmd_fit)

    p = sub.add_parser("solve-inner", parents=[common], help="Solve the inner maximization for a profile")
    p.add_argument("--profile", type=str, help="JSON file with phat, deltas (and optionally rhats, eps_bits)")
    p.add_argument("--eps", type=float, help="Radius in bits")
    p.add_argument("--beta", type=float, help="Confidence level (with --n)")
    p.add_argument("--n", type=int, help="Sample size (with --beta)")
    p.add_argument("--contexts", type=int, help="Number of contexts (default: length of phat)")
    p.set_defaults(handler=cmd_solve_inner)

    p = sub.add_parser("coverage", parents=[common], help="Simulate confidence-set coverage")
    p.add_argument("--p", type=str, help="True context distribution, comma-separated")
    p.add_argument("--n", type=int, help="Sample size")
    p.add_argument("--beta", type=float, help="Confidence level")
    p.add_argument("--trials", type=int, help="Number of trials (default: 2000)")
    p.add_argument("--seed", type=int, help="Seed (default: 0)")
    p.add_argument("--workers", type=int, help="Worker processes (default: 1)")
    p.set_defaults(handler=cmd_coverage)

    p = sub.add_parser("experiment", parents=[common], help="Run a Monte Carlo experiment")
    p.add_argument("--name", choices=["stock", "classify"], help="Experiment (default: stock)")
    p.add_argument("--runs", type=int, help=f"Monte Carlo runs (default: {config.EXPERIMENT_RUNS})")
    p.add_argument("--beta", type=float, help="Confidence level of the robust method")
    p.add_argument("--seed", type=int, help="Seed (default: 0)")
    p.add_argument("--m", type=int, help="Evaluation samples per context")
    p.add_argument("--methods", type=str, help="Comma-separated subset of erm,minimax,robust")
    p.add_argument("--workers", type=int, help="Worker processes (default: 1)")
    p.add_argument("--out", type=str, help="Output directory")
    p.set_defaults(handler=cmd_experiment)

    p = sub.add_parser("gen", parents=[common], help="Dump a synthetic dataset to CSV")
    p.add_argument("--name", choices=["stock", "classify", "two-context"], help="Generator (default: stock)")
    p.add_argument("--seed", type=int, help="Seed")
    p.add_argument("--n", type=int, help="Sample size (stock and classify)")
    p.add_argument("--out", type=str, help="Output CSV (default: stdout)")
    p.set_defaults(handler=cmd_gen)

    p = sub.add_parser("curves", parents=[common], help="Risk and worst-case curves over a parameter grid")
    p.add_argument("--data", type=str, help="Dataset CSV")
    p.add_argument("--loss", choices=["newsvendor", "logistic"], help="Loss name (one-parameter losses only)")
    p.add_argument("--beta", type=float, action="append", help="Confidence level (repeatable)")
    p.add_argument("--theta-min", type=float, help="Grid start (default: 0)")
    p.add_argument("--theta-max", type=float, help="Grid end (default: upper parameter bound)")
    p.add_argument("--theta-steps", type=int, help="Grid points (default: 201)")
    p.add_argument("--out", type=str, help="Output CSV (default: stdout)")
    p.set_defaults(handler=cmd_curves)

    p = sub.add_parser("interval", parents=[common], help="Two-context confidence interval for p1")
    p.add_argument("--phat1", type=float, help="Empirical frequency of context 1")
    p.add_argument("--n", type=int, help="Sample size")
    p.add_argument("--beta", type=float, help="Confidence level")
    p.set_defaults(handler=cmd_interval)

    return parser


def main(argv: Optional[List[str]] = None) -> int:
    """Main function"""
    parser = build_parser()
    args = parser.parse_args(argv)

    level = args.log_level or config.LOG_LEVEL
    logging.basicConfig(
        level=level, format="%(asctime)s - %(name)s - %(levelname)s - %(message)s", stream=sys.stderr
    )
    logging.getLogger().setLevel(level)

    if args.info:
        print_environment()
        return EXIT_OK
    if args.command is None:
        parser.print_help(sys.stderr)
        return EXIT_DATA_ERROR

    try:
        return args.handler(args)
    except SolverError as e:
        logger.error(f"Numerical failure: {e}")
        print(f"error: {e}", file=sys.stderr)
        return EXIT_SOLVER_ERROR
    except (ValueError, OSError) as e:
        logger.error(f"Invalid input: {e}")
        print(f"error: {e}", file=sys.stderr)
        return EXIT_DATA_ERROR


if __name__ == "__main__":
    sys.exit(main())
