"""Command-line front end.

Subcommands: simulate | train | compare | eye | coeffs.  Heavy imports are
deferred until after --threads is handled, so BLAS thread pools can still be
capped from the command line.

Exit codes: 0 success, 2 configuration error, 3 numerical divergence or
window violation, 4 i/o error.
"""

from __future__ import annotations

import argparse
import os
import sys


def _add_common(p: argparse.ArgumentParser, with_out: bool = True) -> None:
    p.add_argument("--config", required=True, help="TOML run configuration")
    if with_out:
        p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int, default=None,
                   help="override the config seed")
    p.add_argument("--threads", type=int, default=None,
                   help="cap BLAS/OpenMP threads for this process")
    if with_out:
        p.add_argument("--no-figures", action="store_true",
                       help="skip SVG figure rendering")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fiberpinn",
        description="Fiber propagation via a split-step reference engine and "
                    "a physics-informed neural solver.")
    sub = parser.add_subparsers(dest="command", required=True)

    _add_common(sub.add_parser(
        "simulate", help="run the split-step reference engine"))
    _add_common(sub.add_parser(
        "train", help="train the neural solver on a task"))
    p = sub.add_parser("compare",
                       help="compare a trained checkpoint against the reference")
    _add_common(p)
    p.add_argument("--checkpoint", required=True, help="trained model file")
    p = sub.add_parser("eye", help="extract eye diagrams for a signal task")
    _add_common(p)
    src = p.add_mutually_exclusive_group()
    src.add_argument("--checkpoint", default=None,
                     help="fold predictions from a trained model")
    src.add_argument("--field", default=None,
                     help="fold a previously exported field CSV")
    _add_common(sub.add_parser(
        "coeffs", help="print the normalized-equation coefficient table"),
        with_out=False)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.threads is not None:
        if args.threads < 1:
            print("--threads must be >= 1", file=sys.stderr)
            return 2
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS",
                    "MKL_NUM_THREADS", "NUMEXPR_NUM_THREADS"):
            os.environ[var] = str(args.threads)
    from . import commands  # heavy imports happen after thread setup
    return commands.run(args)


if __name__ == "__main__":
    sys.exit(main())
