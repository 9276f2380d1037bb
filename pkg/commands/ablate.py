"""``ablate``: paired-seed sampling-scheme comparison or alpha sweep."""

import argparse
import logging

from commands import (
    EXIT_ACCEPTANCE,
    EXIT_OK,
    add_run_arguments,
    float_list,
    int_list,
    out_root,
    run_overrides,
)
from lab.agent import Scheme
from lab.config import load_run_config
from lab.experiment import (
    check_acceptance,
    comparison_frame,
    emit_report,
    run_ablation_schemes_async,
    run_alpha_sweep_async,
)

logger = logging.getLogger(__name__)

NAME = "ablate"


def setup(subparsers: argparse._SubParsersAction) -> None:
    parser = subparsers.add_parser(NAME, help="compare sampling schemes or sweep alpha")
    parser.add_argument("kind", choices=["schemes", "alpha"])
    add_run_arguments(parser)
    parser.add_argument("--seeds", type=int_list, help="paired seeds, e.g. 0,1,2,3,4")
    parser.add_argument("--alphas", type=float_list, help="alpha grid of the sweep")
    parser.add_argument("--scheme", choices=[s.value for s in Scheme],
                        help="scheme used by the alpha sweep")
    parser.add_argument("--check", action="store_true",
                        help="exit with status 3 when an acceptance property fails")
    parser.set_defaults(handler=handle)


async def handle(args: argparse.Namespace) -> int:
    cfg = load_run_config(
        args.config,
        run_overrides(args, seeds=args.seeds, alphas=args.alphas, scheme=args.scheme),
    )
    out_dir = out_root(args.out or cfg.out_dir / f"ablate_{args.kind}", NAME)
    if args.kind == "schemes":
        results = await run_ablation_schemes_async(cfg)
    else:
        results = await run_alpha_sweep_async(cfg)
    emit_report(results, out_dir)
    if args.check and args.kind == "schemes":
        comparison = comparison_frame(results)
        if not all(result.passed for result in check_acceptance(comparison)):
            return EXIT_ACCEPTANCE
    return EXIT_OK
