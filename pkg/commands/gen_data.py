"""``gen-data``: write an offline dataset for an environment and behavior tier."""

import argparse
import asyncio
import logging
from pathlib import Path

from commands import EXIT_OK, out_root
from lab.envs import (
    BehaviorTier,
    EnvSpec,
    build_env,
    generate_offline_dataset,
    make_behavior_policy,
    save_dataset,
)
from lab.errors import ConfigError

logger = logging.getLogger(__name__)

NAME = "gen-data"


def setup(subparsers: argparse._SubParsersAction) -> None:
    parser = subparsers.add_parser(NAME, help="generate an offline dataset D_off")
    parser.add_argument("--env", default=EnvSpec().env_id, help="family:size:slip:horizon")
    parser.add_argument("--tier", default=BehaviorTier.MEDIUM.value,
                        choices=[t.value for t in BehaviorTier])
    parser.add_argument("--n", type=int, default=5000, help="number of transitions")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--out", type=Path, help="dataset file path")
    parser.set_defaults(handler=handle)


def generate(env_id: str, tier: str, n: int, seed: int, path: Path) -> int:
    spec = EnvSpec.parse(env_id)
    mdp, stepper = build_env(spec, seed)
    behavior = make_behavior_policy(mdp, tier, seed)
    try:
        dataset = generate_offline_dataset(stepper, behavior, n, seed, tier, spec.env_id)
    except ValueError as e:
        raise ConfigError(str(e)) from e
    save_dataset(dataset, path)
    return len(dataset)


async def handle(args: argparse.Namespace) -> int:
    if args.out:
        path = out_root(args.out.parent, "data") / args.out.name
    else:
        path = out_root(None, "data") / f"{args.env.replace(':', '_')}_{args.tier}_seed{args.seed}.txt"
    loop = asyncio.get_running_loop()
    count = await loop.run_in_executor(None, generate, args.env, args.tier, args.n, args.seed, path)
    logger.info("Dataset of %d transitions written to %s", count, path)
    return EXIT_OK
