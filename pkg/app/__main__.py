"""
CLI entry point for PolyFrameLab.
"""
import argparse
import sys
from pathlib import Path
from typing import List, Optional

from pydantic import ValidationError

from app import __app_name__, __version__
from app.core.config import describe_settings
from app.core.diagnostics import sample_complexity_bound
from app.core.domains import draw_samples
from app.core.errors import ConfigError, PolyFrameError
from app.core.indexsets import index_set
from app.core.schemas import DomainKind, DomainSpec, ExperimentKind, IndexSetKind, Measure
from app.core.storage import ResultStore, write_index_set, write_samples
from app.core.utils import logger

EXPERIMENT_COMMANDS = {
    "converge": ExperimentKind.CONVERGE,
    "conditioning": ExperimentKind.CONDITIONING,
    "errormap": ExperimentKind.ERRORMAP,
    "bounds": ExperimentKind.BOUNDS,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="python -m app",
        description=f"{__app_name__} - polynomial frame approximation on irregular domains",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  # Convergence study from a config file
  python -m app converge --config configs/dimension_annulus_invsqrt_r05_d2.toml

  # Conditioning sweep with a different seed and output directory
  python -m app conditioning --config configs/conditioning_circle_r1.toml --seed 7 --out results/run7

  # Write the hyperbolic cross of degree 10 in d=3
  python -m app indexset --kind hyperbolic_cross --n 10 --d 3 --out hc_10_3.txt

  # Sample-complexity bound for N=10, lambda=2/3
  python -m app complexity --n-basis 10 --lam 0.6667 --delta 0.5 --gamma 0.01
        """
    )
    parser.add_argument("--version", action="version", version=f"{__app_name__} {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    for name in EXPERIMENT_COMMANDS:
        p = sub.add_parser(name, help=f"Run a {name} experiment")
        p.add_argument("--config", required=True, help="TOML experiment file")
        p.add_argument("--seed", type=int, help="Override the base seed (u64)")
        p.add_argument("--out", help="Output directory")
        p.add_argument("--trials", type=int, help="Override the trial count")
        p.add_argument("--workers", type=int, help="Thread-pool size (default MAX_WORKERS)")

    p = sub.add_parser("indexset", help="Write a multi-index set to a text file")
    p.add_argument("--kind", required=True, choices=[k.value for k in IndexSetKind if k != IndexSetKind.CUSTOM])
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("sample", help="Draw samples from a domain and write them as CSV")
    p.add_argument("--domain", required=True, choices=[k.value for k in DomainKind])
    p.add_argument("--d", type=int, default=2)
    p.add_argument("--count", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--measure", choices=[m.value for m in Measure], default=Measure.UNIFORM.value)
    p.add_argument("--radius", type=float)
    p.add_argument("--inner-radius", type=float)
    p.add_argument("--outer-radius", type=float)
    p.add_argument("--rho", type=float)
    p.add_argument("--lower", type=float)
    p.add_argument("--upper", type=float)
    p.add_argument("--function", dest="function_id")
    p.add_argument("--out", required=True)

    p = sub.add_parser("complexity", help="Print the sample-complexity bound")
    p.add_argument("--n-basis", type=int, required=True)
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--lam", type=float, help="lambda-rectangle constant")
    group.add_argument("--nikolskii", type=float, help="Nikolskii constant (squared internally)")
    p.add_argument("--delta", type=float, default=0.5)
    p.add_argument("--gamma", type=float, default=0.1)

    p = sub.add_parser("validate", help="Load a config and print its resolved schedule")
    p.add_argument("--config", required=True)

    return parser


def run_experiment_command(args) -> int:
    from app.experiments import TrialScheduler, run_experiment
    from app.experiments.config_loader import apply_overrides, load_config

    config = apply_overrides(load_config(args.config), seed=args.seed, trials=args.trials, out=args.out)
    expected = EXPERIMENT_COMMANDS[args.command]
    if config.experiment != expected:
        raise ConfigError(f"{args.config} describes a {config.experiment.value} experiment, not {args.command}")

    store = ResultStore(config.output_dir)
    result = run_experiment(config, store, TrialScheduler(args.workers))
    for path in result.paths:
        print(path)
    if config.experiment == ExperimentKind.BOUNDS and result.extras.get("violations"):
        print(f"{result.extras['violations']} bound violations", file=sys.stderr)
    return 0


def run_indexset(args) -> int:
    lam = index_set(IndexSetKind(args.kind), args.n, args.d)
    write_index_set(lam, Path(args.out))
    print(f"{lam.descriptor()} N={len(lam)} -> {args.out}")
    return 0


def run_sample(args) -> int:
    fields = {
        "kind": args.domain, "dimension": args.d, "radius": args.radius,
        "inner_radius": args.inner_radius, "outer_radius": args.outer_radius, "rho": args.rho,
        "lower": args.lower, "upper": args.upper, "function_id": args.function_id,
    }
    try:
        domain = DomainSpec.model_validate({k: v for k, v in fields.items() if v is not None})
    except ValidationError as e:
        raise ConfigError(f"invalid domain: {e}") from e
    samples = draw_samples(domain, args.count, args.seed, Measure(args.measure))
    write_samples(samples, Path(args.out))
    print(f"{samples.size} samples (acceptance {samples.acceptance_rate:.4f}) -> {args.out}")
    return 0


def run_complexity(args) -> int:
    if args.lam is not None:
        m = sample_complexity_bound(args.n_basis, args.delta, args.gamma, lambda_constant=args.lam)
    else:
        m = sample_complexity_bound(args.n_basis, args.delta, args.gamma, nikolskii_squared=args.nikolskii ** 2)
    print(m)
    return 0


def run_validate(args) -> int:
    from app.experiments.config_loader import config_digest, load_config
    from app.experiments.schedule import oversampling_ratio, resolve_schedule

    config = load_config(args.config)
    print(f"{config.run_name()} [{config.experiment.value}] hash={config_digest(config)}")
    print(f"domain={config.domain.descriptor()} basis={config.basis.descriptor()} "
          f"index_set={config.index_set.value} measure={config.measure.value}")
    for point in resolve_schedule(config):
        print(f"  [{point.index}] {point.rule.label():<22} n={point.n:<4} N={point.n_basis:<7} "
              f"M={point.samples:<9} M/N={oversampling_ratio(point):.2f}")
    print(describe_settings())
    return 0


COMMANDS = {
    "indexset": run_indexset,
    "sample": run_sample,
    "complexity": run_complexity,
    "validate": run_validate,
}


def main(argv: Optional[List[str]] = None) -> int:
    """Main CLI entry point; returns the process exit code."""
    args = build_parser().parse_args(argv)
    handler = run_experiment_command if args.command in EXPERIMENT_COMMANDS else COMMANDS[args.command]
    try:
        return handler(args)
    except PolyFrameError as e:
        logger.error(f"{args.command} failed: {e}")
        return e.exit_code


if __name__ == "__main__":
    sys.exit(main())
