"""
Command-line interface for toruscascade.
"""

import argparse
import os
import sys
from typing import List, Optional

from toruscascade import __version__
from toruscascade.config import ConfigLoader, default_config_text
from toruscascade.errors import (
    ArtifactError,
    BetaUnderflowError,
    ConfigError,
    IntegrationError,
    LatticeOverflowError,
    MultiplierSearchError,
    ReductionMismatchError,
    ResolutionError,
    ScheduleError,
    VerificationError,
)
from toruscascade.orchestrator import CascadeRunner

EXIT_OK = 0
EXIT_VERIFICATION = 1
EXIT_USAGE = 2
EXIT_NUMERIC = 3
EXIT_INTERRUPTED = 130

NUMERIC_ERRORS = (
    LatticeOverflowError,
    MultiplierSearchError,
    BetaUnderflowError,
    ScheduleError,
    ResolutionError,
    IntegrationError,
)

COMMANDS = ["family", "schedule", "simulate", "report"]


def _error_block(title: str, message: str, hints: Optional[List[str]] = None):
    print("\n" + "=" * 80, file=sys.stderr)
    print(f"ERROR: {title}", file=sys.stderr)
    print("=" * 80, file=sys.stderr)
    print(f"\n{message}", file=sys.stderr)
    if hints:
        print("\nTry:", file=sys.stderr)
        for hint in hints:
            print(f"  - {hint}", file=sys.stderr)
    print("\n" + "=" * 80 + "\n", file=sys.stderr)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument(
        "--config",
        default=os.getenv("TORUSCASCADE_CONFIG"),
        metavar="FILE",
        help="Path to configuration file (default: searches for .toruscascade.yml/yaml/json)",
    )
    common.add_argument(
        "--out",
        default=os.getenv("TORUSCASCADE_OUT"),
        metavar="DIR",
        help="Output directory for artifacts (default: cascade-output, or set TORUSCASCADE_OUT)",
    )
    common.add_argument("--tol", type=float, metavar="TOL", help="Integrator tolerance for the resonant system")
    common.add_argument("--beta-mode", dest="beta_mode", choices=["scaled", "paper"], help="Amplitude scale")
    common.add_argument("--cycles", type=int, metavar="N", help="Number of cascade cycles")
    common.add_argument("--K", dest="K", type=int, metavar="K", help="Length of the frequency family")
    common.add_argument("--quiet", action="store_true", help="Suppress detailed output (only show summary)")

    parser = argparse.ArgumentParser(
        prog="toruscascade",
        description="Build, simulate and check a frequency cascade driven by a decaying potential on the torus",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  # Construct and certify the default family
  toruscascade family --out run1

  # Lay out three cycles with a larger amplitude scale
  toruscascade schedule --out run1 --cycles 3

  # Simulate with a looser tolerance, then write the report
  toruscascade simulate --out run1 --tol 1e-9
  toruscascade report --out run1

  # Print the documented configuration schema
  toruscascade --print-default-config > .toruscascade.yml

Environment variables:
  TORUSCASCADE_CONFIG   Configuration file
  TORUSCASCADE_OUT      Output directory

Exit codes:
  0 ok, 1 verification failure, 2 usage error, 3 numeric failure, 130 interrupted
        """,
    )
    parser.add_argument(
        "--print-default-config",
        action="store_true",
        help="Print the default configuration file and exit",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")

    sub = parser.add_subparsers(dest="command", metavar="COMMAND")
    sub.add_parser("family", parents=[common], help="Construct the frequency family and certify P1-P10")
    sub.add_parser("schedule", parents=[common], help="Lay out the drive schedule and potential norms")
    sub.add_parser("simulate", parents=[common], help="Run the chain, resonant, full and perturbation systems")
    sub.add_parser("report", parents=[common], help="Evaluate the bounds and write the growth report")
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    """Main CLI entry point; returns the exit code."""
    parser = build_parser()
    args = parser.parse_args(argv)

    if args.print_default_config:
        sys.stdout.write(default_config_text())
        return EXIT_OK
    if args.command not in COMMANDS:
        parser.print_usage(sys.stderr)
        print("toruscascade: error: a command is required (family, schedule, simulate, report)", file=sys.stderr)
        return EXIT_USAGE

    try:
        loader = ConfigLoader(config_path=args.config)
        loaded = loader.load()
        if loaded and not args.quiet:
            print(f"Loaded configuration from: {args.config or 'default config file'}")
        config = loader.merge_with_args(vars(args))
    except (FileNotFoundError, RuntimeError, ConfigError) as e:
        _error_block("Invalid Configuration", str(e), ["toruscascade --print-default-config"])
        return EXIT_USAGE

    runner = CascadeRunner(config, verbose=not args.quiet)
    stages = {
        "family": runner.run_family,
        "schedule": runner.run_schedule,
        "simulate": runner.run_simulate,
        "report": runner.run_report,
    }

    try:
        stages[args.command]()
        return EXIT_OK

    except KeyboardInterrupt:
        print("\n\nInterrupted by user")
        return EXIT_INTERRUPTED

    except (VerificationError, ReductionMismatchError) as e:
        _error_block("Verification Failed", str(e))
        return EXIT_VERIFICATION

    except ArtifactError as e:
        _error_block("Missing Artifact", str(e))
        return EXIT_USAGE

    except NUMERIC_ERRORS as e:
        hints = []
        if isinstance(e, (LatticeOverflowError, MultiplierSearchError)):
            hints.append("use a smaller --K")
        if isinstance(e, (BetaUnderflowError, ScheduleError)):
            hints.append("use --beta-mode scaled or fewer --cycles")
        if isinstance(e, IntegrationError):
            hints.append("loosen --tol")
        _error_block("Numeric Failure", f"{type(e).__name__}: {str(e)}", hints)
        return EXIT_NUMERIC

    except Exception as e:
        _error_block("Unexpected Error", f"{type(e).__name__}: {str(e)}")
        if not args.quiet:
            import traceback

            print("Full traceback:", file=sys.stderr)
            print("-" * 80, file=sys.stderr)
            traceback.print_exc()
        return EXIT_VERIFICATION


def run():
    sys.exit(main())


if __name__ == "__main__":
    run()
