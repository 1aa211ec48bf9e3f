"""Command-line entry point.

    cfmimo figure {ui-gap|term-comparison|rate-cdf} [options]
    cfmimo rates [options]
    cfmimo validate [--fadings N] [--seed S]
    cfmimo rerun FILE [--out PATH]

Exit codes: 0 success, 2 invalid configuration, 1 runtime failure.
"""

import argparse
import sys

from .config import ConfigError, load_config_file
from .experiments import ExperimentSpec, Figure, read_output, run_figure, spec_from_metadata
from .montecarlo import TrialPlan
from .validation import oracle_checks

EXIT_OK, EXIT_RUNTIME, EXIT_CONFIG = 0, 1, 2

_FLAG_TO_FIELD = {"aps": "num_aps", "users": "num_users", "area_m": "area_side"}


def _add_run_options(p, fadings_default=10_000):
    p.add_argument("--aps", type=int, help="number of APs (M)")
    p.add_argument("--users", type=int, help="number of users (K)")
    p.add_argument("--area-m", type=float, help="side of the square area in meters")
    p.add_argument("--snapshots", type=int, default=200, help="network realizations")
    p.add_argument("--fadings", type=int, default=fadings_default,
                   help="small-scale fading draws per Monte Carlo snapshot")
    p.add_argument("--mc-snapshots", type=int, default=0,
                   help="limit Monte Carlo to the first N snapshots (0: all that need it)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--config", help="flat key=value file of SystemConfig fields")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   help="override any SystemConfig field (repeatable)")
    p.add_argument("--out", help="output file (default: stdout)")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--cdf", action="store_true", help="emit sorted CDF points instead of samples")
    p.add_argument("--forced-orthogonal", action="store_true",
                   help="give users distinct pilots round-robin (needs K <= training_len)")
    p.add_argument("--overhead-adjusted", action="store_true",
                   help="also emit rates scaled by (1 - training_len/coherence_len)")
    p.add_argument("--workers", type=int, default=1, help="worker threads (output is unaffected)")


def build_parser():
    parser = argparse.ArgumentParser(prog="cfmimo", description=__doc__.split("\n\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)

    fig = sub.add_parser("figure", help="reproduce one of the evaluation figures")
    fig.add_argument("name", choices=[f.value for f in Figure if f is not Figure.CUSTOM])
    _add_run_options(fig)

    rates = sub.add_parser("rates", help="closed-form terms and rates for both schemes")
    _add_run_options(rates)

    val = sub.add_parser("validate", help="Monte Carlo vs closed-form oracle checks")
    val.add_argument("--fadings", type=int, default=100_000)
    val.add_argument("--seed", type=int, default=0)
    val.add_argument("--workers", type=int, default=1)

    rerun = sub.add_parser("rerun", help="regenerate an output file from its own metadata")
    rerun.add_argument("file")
    rerun.add_argument("--out")
    rerun.add_argument("--format", choices=("csv", "json"))
    rerun.add_argument("--workers", type=int, default=1)
    return parser


def _overrides(args):
    overrides = load_config_file(args.config) if args.config else {}
    for item in args.set:
        if "=" not in item:
            raise ConfigError([f"--set expects KEY=VALUE, got {item!r}"])
        key, value = item.split("=", 1)
        overrides[key.strip()] = value.strip()
    for flag, name in _FLAG_TO_FIELD.items():
        value = getattr(args, flag)
        if value is not None:
            overrides[name] = value
    return overrides


def _spec(args, figure):
    try:
        plan = TrialPlan(num_snapshots=args.snapshots, num_fadings=args.fadings,
                         base_seed=args.seed, mc_snapshots=args.mc_snapshots or None)
    except ValueError as exc:
        raise ConfigError([str(exc)]) from None
    spec = ExperimentSpec(
        figure=figure,
        config_overrides=_overrides(args),
        trial_plan=plan,
        output_path=args.out,
        output_format=args.format,
        cdf=args.cdf,
        forced_orthogonal=args.forced_orthogonal,
        overhead_adjusted=args.overhead_adjusted,
    )
    spec.resolved_config()
    return spec


def _emit(spec, workers):
    result, text = run_figure(spec, workers=workers)
    if spec.output_path is None:
        sys.stdout.write(text)
    else:
        summary = result.metadata["summary"]
        for key, entry in summary.items():
            if not isinstance(entry, dict):
                print(f"{key}: {entry}", file=sys.stderr)
                continue
            for quantity, stats in entry.items():
                print(f"{key}.{quantity}: median={stats['median']:.6g} (n={stats['count']})",
                      file=sys.stderr)
        print(f"wrote {spec.output_path}", file=sys.stderr)


def _validate(args):
    checks = oracle_checks(num_fadings=args.fadings, seed=args.seed, workers=args.workers)
    for c in checks:
        print(c.line())
    failed = sum(not c.passed for c in checks)
    print(f"{len(checks) - failed}/{len(checks)} checks passed")
    return EXIT_OK if failed == 0 else EXIT_RUNTIME


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        if args.command == "figure":
            _emit(_spec(args, args.name), args.workers)
        elif args.command == "rates":
            _emit(_spec(args, Figure.CUSTOM), args.workers)
        elif args.command == "validate":
            return _validate(args)
        elif args.command == "rerun":
            meta, _, _ = read_output(args.file)
            fmt = args.format or ("json" if args.file.endswith(".json") else "csv")
            _emit(spec_from_metadata(meta, args.out, fmt), args.workers)
    except ConfigError as exc:
        for v in exc.violations:
            print(f"config error: {v}", file=sys.stderr)
        return EXIT_CONFIG
    except (OSError, ValueError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
