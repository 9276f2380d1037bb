"""``report``: rebuild comparison tables and plot scripts from saved run logs."""

import argparse
import logging
from pathlib import Path

from commands import EXIT_ACCEPTANCE, EXIT_OK, out_root
from lab.experiment import check_acceptance, comparison_frame, emit_report, load_results

logger = logging.getLogger(__name__)

NAME = "report"


def setup(subparsers: argparse._SubParsersAction) -> None:
    parser = subparsers.add_parser(NAME, help="summarize the run logs of an ablation directory")
    parser.add_argument("runs", type=Path, help="directory holding a runs/ folder of metrics CSVs")
    parser.add_argument("--out", type=Path, help="report directory, defaults to the input")
    parser.add_argument("--check", action="store_true",
                        help="exit with status 3 when an acceptance property fails")
    parser.set_defaults(handler=handle)


async def handle(args: argparse.Namespace) -> int:
    results = load_results(args.runs)
    out_dir = out_root(args.out or args.runs, NAME)
    emit_report(results, out_dir)
    if args.check:
        if not all(result.passed for result in check_acceptance(comparison_frame(results))):
            return EXIT_ACCEPTANCE
    return EXIT_OK
