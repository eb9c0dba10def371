#!/usr/bin/env python3
"""
Cocycle Lab - numerical experiments with linear cocycles over toral automorphisms.

Every command reads a YAML experiment file and writes one report.

Usage:
    ./cocyclelab.py check-bunching --config configs/diagonal.yaml
    ./cocyclelab.py demo-triangular --config configs/triangular.yaml --out reports
    ./cocyclelab.py holonomy --config configs/sheared.yaml -v
"""

import sys


def main():
    """Main entry point for the lab."""
    launch_cli()


def launch_cli():
    """Launch CLI mode with argument parsing."""
    import argparse

    from cli import COMMANDS, run_cli

    parser = argparse.ArgumentParser(
        description="Cocycle Lab - holonomies, su-cycles and conjugacies of linear cocycles",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  %(prog)s check-bunching --config configs/diagonal.yaml     Pointwise and weak bunching
  %(prog)s holonomy --config configs/triangular.yaml         Holonomies on sample legs
  %(prog)s holder-estimate --config configs/constant.yaml    Hölder exponents and alpha
  %(prog)s cycle-weights --config configs/triangular.yaml    Weights of su-cycles at x0
  %(prog)s conjugacy-extend --config configs/smooth_pair.yaml  Extend C from a base point
  %(prog)s certify-conjugacy --config configs/smooth_pair.yaml Residuals of a known C
  %(prog)s demo-triangular --config configs/triangular.yaml  Triangular pair against its oracles
  %(prog)s demo-perturbed --config configs/perturbed_constant.yaml  Dominated splitting demo

Exit codes: 0 ok, 1 report could not be written, 2 configuration error, 3 computation error
        """,
    )

    parser.add_argument("command", choices=list(COMMANDS), help="Experiment to run")
    parser.add_argument("--config", required=True, help="YAML experiment file")

    # Configuration overrides
    parser.add_argument("--out", help="Report directory (overrides output.dir)")
    parser.add_argument("--seed", type=int, help="Random seed (overrides run.seed)")
    parser.add_argument("--threads", type=int, help="Worker threads (overrides run.threads)")
    parser.add_argument("--tol", type=float, help="Holonomy tolerance (overrides run.tol)")
    parser.add_argument("--format", choices=["json", "csv"], help="Report format (overrides output.format)")

    parser.add_argument(
        "--verbose", "-v", action="count", default=0, help="More log output (-v info, -vv debug)"
    )

    args = parser.parse_args()

    # Run CLI with parsed arguments
    try:
        code = run_cli(args)
    except KeyboardInterrupt:
        print("\nInterrupted by user")
        sys.exit(130)
    except Exception as e:
        print(f"Error: {e}")
        sys.exit(1)
    sys.exit(code)


if __name__ == "__main__":
    main()
