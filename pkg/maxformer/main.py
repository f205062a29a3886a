"""
Command-line entry point.

maxformer compile | verify | sweep | regions | bounds | selftest

Exit codes: 0 pass, 1 check failed, 2 IO or parse error, 3 shape mismatch,
4 violated precondition.
"""

import argparse
import logging
import sys
from pathlib import Path
from typing import Callable, Optional, Sequence

from pydantic import ValidationError

from maxformer.cli import RunConfig
from maxformer.cli.commands import (
    run_bounds,
    run_compile,
    run_regions,
    run_selftest_command,
    run_sweep,
    run_verify,
)
from maxformer.config import settings
from maxformer.core.models import AttentionKind, ResidualPolicy
from maxformer.core.validation import (
    MaxformerError,
    PreconditionError,
    RepositoryError,
    ShapeMismatchError,
    SpecParseError,
    SpecValidationError,
)

logger = logging.getLogger("maxformer")

EXIT_PASS = 0
EXIT_FAILED = 1
EXIT_IO = 2
EXIT_SHAPE = 3
EXIT_PRECONDITION = 4

DEFAULT_LAMBDAS = (1e2, 1e3, 1e4, 1e5)

COMMANDS: dict[str, Callable[[RunConfig], int]] = {
    "compile": run_compile,
    "verify": run_verify,
    "sweep": run_sweep,
    "regions": run_regions,
    "bounds": run_bounds,
    "selftest": run_selftest_command,
}


def _floats(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(part) for part in text.split(",") if part.strip())
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from exc


def _ints(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(part) for part in text.split(",") if part.strip())
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from exc


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--log-level", default=None, help="Overrides MAXFORMER_LOG_LEVEL")
    common.add_argument("--threads", type=int, default=None, help="Worker cap; falls back to MAXFORMER_THREADS")
    common.add_argument("--seed", type=int, default=settings.seed)
    common.add_argument("--report", type=Path, default=None, help="Report path; printed to stdout when omitted")

    parser = argparse.ArgumentParser(prog="maxformer", description="Compile maxout networks into Transformers")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("compile", parents=[common], help="Compile a spec into Transformer weights")
    p.add_argument("--spec", type=Path)
    p.add_argument("--domain", type=Path)
    p.add_argument("--out", type=Path)
    p.add_argument("--s", type=int, default=None, help="Tournament width for ranks above T")
    p.add_argument("--alpha-margin", type=float, default=settings.alpha_margin)
    p.add_argument("--deltas", type=_floats, default=None, help="One margin per shifted stage")
    p.add_argument("--residual", choices=[r.value for r in ResidualPolicy], default=ResidualPolicy.AUTO.value)

    p = sub.add_parser("verify", parents=[common], help="Check a saved net against its spec")
    p.add_argument("--net", type=Path)
    p.add_argument("--spec", type=Path)
    p.add_argument("--domain", type=Path)
    p.add_argument("--mode", choices=[k.value for k in AttentionKind], default=AttentionKind.HARDMAX.value)
    p.add_argument("--lam", type=float, default=None)
    p.add_argument("--samples", type=int, default=settings.samples)
    p.add_argument("--tol", type=float, default=settings.tolerance)

    p = sub.add_parser("sweep", parents=[common], help="Softmax error along a lambda grid")
    p.add_argument("--net", type=Path)
    p.add_argument("--spec", type=Path)
    p.add_argument("--domain", type=Path)
    p.add_argument("--lambdas", type=_floats, default=DEFAULT_LAMBDAS)
    p.add_argument("--samples", type=int, default=settings.samples)
    p.add_argument("--no-tie-points", dest="tie_points", action="store_false")

    p = sub.add_parser("regions", parents=[common], help="Count linear regions on a slice")
    p.add_argument("--net", type=Path)
    p.add_argument("--spec", type=Path)
    p.add_argument("--slice", type=Path)
    p.add_argument("--resolution", type=int, default=None)
    p.add_argument("--csv", type=Path, default=None, help="Per-cell dump for 2D slices")

    p = sub.add_parser("bounds", parents=[common], help="Region lower-bound formulas")
    p.add_argument("--kind", dest="bound_kind", choices=["maxout", "transformer"])
    p.add_argument("--n0", type=int)
    p.add_argument("--widths", type=_ints)
    p.add_argument("--k", type=int)
    p.add_argument("--n", type=int)
    p.add_argument("--m", type=int)
    p.add_argument("--T", type=int)
    p.add_argument("--D", type=int)
    p.add_argument("--q", type=int)
    p.add_argument("--adjust", action="store_true", help="Round n_l/n down to an even integer")

    p = sub.add_parser("selftest", parents=[common], help="Run the acceptance checks")
    p.add_argument("--quick", action="store_true")
    p.add_argument("--alpha-margin", type=float, default=settings.alpha_margin)

    return parser


def exit_code(exc: Exception) -> int:
    """Map a domain error to the documented exit status"""
    if isinstance(exc, (RepositoryError, SpecParseError)):
        return EXIT_IO
    if isinstance(exc, ShapeMismatchError):
        return EXIT_SHAPE
    if isinstance(exc, (PreconditionError, SpecValidationError)):
        return EXIT_PRECONDITION
    # NonFiniteActivationError, NonConvexOracleError: the check itself failed
    return EXIT_FAILED


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=(args.log_level or settings.log_level).upper(),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    values = {k: v for k, v in vars(args).items() if k != "log_level" and v is not None}
    try:
        config = RunConfig.model_validate(values)
    except ValidationError as exc:
        first = exc.errors()[0]
        print(f"maxformer {args.command}: {first['msg'].removeprefix('Value error, ')}", file=sys.stderr)
        return EXIT_IO

    try:
        return COMMANDS[config.command](config)
    except MaxformerError as exc:
        logger.debug("command failed", exc_info=True)
        print(f"maxformer {config.command}: {exc}", file=sys.stderr)
        return exit_code(exc)
    except ValidationError as exc:
        # Option values rejected by a model, e.g. a nonpositive delta
        print(f"maxformer {config.command}: {exc.errors()[0]['msg']}", file=sys.stderr)
        return EXIT_PRECONDITION


if __name__ == "__main__":
    sys.exit(main())
