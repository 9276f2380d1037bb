"""``train``: offline stage then online stage for one scheme and seed."""

import argparse
import asyncio
import logging
from pathlib import Path

from commands import EXIT_OK, add_run_arguments, out_root, run_overrides
from lab.agent import Scheme, monte_carlo_return
from lab.config import load_run_config
from lab.envs import Stepper
from lab.experiment import prepare_seed, run_cell
from lab.model_learn import dump_model

logger = logging.getLogger(__name__)

NAME = "train"


def setup(subparsers: argparse._SubParsersAction) -> None:
    parser = subparsers.add_parser(NAME, help="train offline, then online, and log every epoch")
    add_run_arguments(parser)
    parser.add_argument("--scheme", choices=[s.value for s in Scheme])
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--dump-model", action="store_true",
                        help="also write the offline ensemble and its uncertainty table")
    parser.set_defaults(handler=handle)


def run(args: argparse.Namespace) -> Path:
    cfg = load_run_config(args.config, run_overrides(args, scheme=args.scheme, seeds=(args.seed,)))
    out_dir = out_root(args.out or cfg.out_dir / NAME, NAME)
    prepared = prepare_seed(cfg, args.seed)
    log = run_cell(cfg, prepared, cfg.scheme, cfg.scheme.value)
    path = out_dir / f"{cfg.scheme.value}_seed{args.seed}.csv"
    log.to_csv(path)
    logger.info(
        "eta_off %.4f -> final return %.4f after %d epochs; log at %s",
        log.eta_off, log.returns()[-1], len(log), path,
    )
    if args.dump_model:
        model_path = out_dir / f"model_seed{args.seed}.txt"
        dump_model(
            prepared.offline.model, prepared.offline.uncertainty, model_path,
            prepared.mdp.initial_dist, prepared.mdp.discount,
        )
    if cfg.train.eval_episodes:
        mean, stderr = monte_carlo_return(
            Stepper(prepared.mdp, cfg.env.horizon), prepared.offline.policy,
            cfg.train.eval_episodes, args.seed,
        )
        logger.info(
            "Offline policy: exact return %.4f, Monte-Carlo %.4f +- %.4f over %d episodes",
            log.eta_off, mean, stderr, cfg.train.eval_episodes,
        )
    return path


async def handle(args: argparse.Namespace) -> int:
    loop = asyncio.get_running_loop()
    await loop.run_in_executor(None, run, args)
    return EXIT_OK
