"""``verify``: numerical bound checks on random MDPs."""

import argparse
import logging
from pathlib import Path

from commands import EXIT_OK, EXIT_VIOLATION, float_list, out_root
from lab.metrics import FLOAT_FORMAT
from lab.theory_verify import VerifyConfig, verify_all_async, write_reports

logger = logging.getLogger(__name__)

NAME = "verify"


def setup(subparsers: argparse._SubParsersAction) -> None:
    parser = subparsers.add_parser(NAME, help="check the value-gap bounds on random MDPs")
    defaults = VerifyConfig()
    parser.add_argument("--seeds", type=int, default=defaults.seeds, help="number of instances")
    parser.add_argument("--first-seed", type=int, default=defaults.first_seed)
    parser.add_argument("--states", type=int, default=defaults.max_states, help="largest S")
    parser.add_argument("--actions", type=int, default=defaults.max_actions, help="largest A")
    parser.add_argument("--horizon", type=int, default=defaults.horizon, help="largest H")
    parser.add_argument("--eps-grid", type=float_list, default=defaults.eps_grid)
    parser.add_argument("--lambda", dest="penalty", type=float, default=defaults.penalty)
    parser.add_argument("--discount", type=float, default=defaults.discount)
    parser.add_argument("--out", type=Path, help="bound report CSV path")
    parser.set_defaults(handler=handle)


async def handle(args: argparse.Namespace) -> int:
    config = VerifyConfig(
        seeds=args.seeds,
        first_seed=args.first_seed,
        max_states=args.states,
        max_actions=args.actions,
        horizon=args.horizon,
        eps_grid=args.eps_grid,
        penalty=args.penalty,
        discount=args.discount,
    )
    summary, reports = await verify_all_async(config)
    if args.out:
        report_path = out_root(args.out.parent, NAME) / args.out.name
    else:
        report_path = out_root(None, NAME) / "bound_reports.csv"
    write_reports(reports, report_path)
    summary_path = report_path.with_name(report_path.stem + ".summary.csv")
    summary.to_frame().to_csv(summary_path, index=False, float_format=FLOAT_FORMAT)
    for witness in summary.witnesses[:10]:
        logger.error(
            "Violation %s seed %d h=%d %s: lhs %.17g > rhs %.17g",
            witness.check, witness.seed, witness.h, witness.witness, witness.lhs, witness.rhs,
        )
    if not summary.ok:
        logger.error("%d of %d reports violate their bound", summary.total_violations, summary.total)
        return EXIT_VIOLATION
    logger.info("All %d bound reports hold; written to %s", summary.total, report_path)
    return EXIT_OK
