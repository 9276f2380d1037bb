"""Subcommands of the moore CLI; each module exposes ``setup`` and ``handle``."""

import argparse
from pathlib import Path
from typing import Any, Dict, Optional, Tuple

from lab.config import default_out_dir
from lab.envs import EnvSpec
from lab.errors import ConfigError

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_VIOLATION = 2
EXIT_ACCEPTANCE = 3


def float_list(text: str) -> Tuple[float, ...]:
    try:
        return tuple(float(v) for v in text.replace(",", " ").split())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def int_list(text: str) -> Tuple[int, ...]:
    try:
        return tuple(int(v) for v in text.replace(",", " ").split())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def add_run_arguments(parser: argparse.ArgumentParser) -> None:
    """Flags shared by train and ablate; unset flags keep config-file values."""
    parser.add_argument("--config", type=Path, help="INI run config with [env] [data] [train] [run]")
    parser.add_argument("--env", help="environment id family:size:slip:horizon")
    parser.add_argument("--tier", help="behavior tier of the offline dataset")
    parser.add_argument("--dataset", type=Path, help="load D_off from a dataset file")
    parser.add_argument("--dataset-size", type=int, help="transitions in a generated D_off")
    parser.add_argument("--epochs", type=int, help="online epochs T")
    parser.add_argument("--alpha", type=float, help="offline priority decay")
    parser.add_argument("--lambda", dest="penalty", type=float, help="uncertainty penalty")
    parser.add_argument("--out", type=Path, help="output directory")


def run_overrides(args: argparse.Namespace, **run: Any) -> Dict[str, Dict[str, Any]]:
    """Maps parsed CLI flags onto config sections."""
    env: Dict[str, Any] = {}
    if getattr(args, "env", None):
        spec = EnvSpec.parse(args.env)
        env = {"family": spec.family, "size": spec.size, "slip": spec.slip, "horizon": spec.horizon}
    run.setdefault("out_dir", getattr(args, "out", None))
    return {
        "env": env,
        "data": {
            "tier": getattr(args, "tier", None),
            "path": getattr(args, "dataset", None),
            "size": getattr(args, "dataset_size", None),
        },
        "train": {
            "epochs": getattr(args, "epochs", None),
            "alpha": getattr(args, "alpha", None),
            "penalty": getattr(args, "penalty", None),
        },
        "run": run,
    }


def out_root(path: Optional[Path], default_child: str) -> Path:
    """Explicit --out, else ``MOORE_OUT_DIR``/<default_child>."""
    root = Path(path) if path is not None else default_out_dir() / default_child
    try:
        root.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise ConfigError(f"cannot create output directory {root}: {e}") from e
    return root
