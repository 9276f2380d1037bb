"""Command-line entry point of the offline-to-online model-based RL lab."""

import os
import sys
import logging
import argparse
import asyncio
import importlib
import coloredlogs
from typing import List, Optional
from dotenv import load_dotenv

from commands import EXIT_CONFIG
from lab.errors import ConfigError

# Load environment variables
load_dotenv()
LOG_LEVEL = os.getenv("MOORE_LOG_LEVEL", "INFO").upper()
LOG_FORMAT = "%(asctime)s %(levelname)-8s %(name)s %(message)s"
LOG_DATE_FORMAT = "%Y-%m-%d %H:%M:%S"
COMMANDS_DIR = os.path.join(os.path.dirname(os.path.abspath(__file__)), "commands")

logger = logging.getLogger("moore")


def load_commands(subparsers: argparse._SubParsersAction) -> List[str]:
    """Imports every module in ./commands and registers its subcommand.

    Args:
        subparsers (argparse._SubParsersAction): Root parser's subcommand group.

    Returns:
        List[str]: Names of the modules that loaded.
    """
    loaded = []
    for filename in sorted(os.listdir(COMMANDS_DIR)):
        if filename.endswith(".py") and not filename.startswith("__"):
            module_name = f"commands.{filename[:-3]}"
            try:
                importlib.import_module(module_name).setup(subparsers)
                loaded.append(module_name)
                logger.debug("Loaded command: %s", module_name)
            except Exception as e:
                logger.exception("Failed to load command %s: %s", module_name, e)
    return loaded


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="moore", description="Offline-to-online model-based RL on tabular problems."
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="log at DEBUG level")
    subparsers = parser.add_subparsers(dest="command", metavar="command")
    load_commands(subparsers)
    return parser


async def main(argv: Optional[List[str]] = None) -> int:
    """Parses ``argv``, runs the chosen subcommand and returns its exit status."""
    parser = build_parser()
    args = parser.parse_args(argv)
    coloredlogs.install(
        level="DEBUG" if args.verbose else LOG_LEVEL,
        fmt=LOG_FORMAT,
        datefmt=LOG_DATE_FORMAT,
    )
    if not getattr(args, "handler", None):
        parser.print_help()
        return EXIT_CONFIG
    try:
        return await args.handler(args)
    except ConfigError as e:
        logger.error("Invalid configuration: %s", e)
        return EXIT_CONFIG
    except Exception as e:
        logger.exception("Command %s failed: %s", args.command, e)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(asyncio.run(main()))
