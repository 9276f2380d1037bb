"""Run configuration: typed settings, INI config files and environment defaults."""

import configparser
import logging
import os
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Dict, Mapping, Optional, Tuple, Union

from lab.agent import Scheme, TrainConfig
from lab.envs import BehaviorTier, EnvSpec
from lab.errors import ConfigError

logger = logging.getLogger(__name__)

DEFAULT_OUT_DIR = "moore-out"
DEFAULT_SEEDS = (0, 1, 2, 3, 4)
DEFAULT_ALPHAS = (0.1, 0.25, 0.5, 1.0, 2.0, 4.0, 10.0)


def default_out_dir() -> Path:
    """Output root from ``MOORE_OUT_DIR``, or ./moore-out."""
    return Path(os.getenv("MOORE_OUT_DIR") or DEFAULT_OUT_DIR)


@dataclass(frozen=True)
class RunConfig:
    """Everything a training or ablation run needs.

    Attributes:
        env (EnvSpec): Environment.
        tier (BehaviorTier): Behavior quality of D_off.
        dataset_size (int): Transitions in D_off.
        dataset_path (Optional[Path]): Load D_off from this file instead of generating it.
        train (TrainConfig): Hyper-parameters of both stages.
        scheme (Scheme): Sampling scheme of a single train run.
        seeds (Tuple[int, ...]): Paired seeds of an ablation.
        alphas (Tuple[float, ...]): Grid of the alpha sweep.
        out_dir (Path): Output root.
    """

    env: EnvSpec = field(default_factory=EnvSpec)
    tier: BehaviorTier = BehaviorTier.MEDIUM
    dataset_size: int = 5000
    dataset_path: Optional[Path] = None
    train: TrainConfig = field(default_factory=TrainConfig)
    scheme: Scheme = Scheme.PRIORITIZED
    seeds: Tuple[int, ...] = DEFAULT_SEEDS
    alphas: Tuple[float, ...] = DEFAULT_ALPHAS
    out_dir: Path = field(default_factory=default_out_dir)

    def __post_init__(self) -> None:
        try:
            object.__setattr__(self, "tier", BehaviorTier(self.tier))
            object.__setattr__(self, "scheme", Scheme(self.scheme))
        except ValueError as e:
            raise ConfigError(str(e)) from e
        object.__setattr__(self, "seeds", tuple(int(s) for s in self.seeds))
        object.__setattr__(self, "alphas", tuple(float(a) for a in self.alphas))
        object.__setattr__(self, "out_dir", Path(self.out_dir))
        if self.dataset_path is not None:
            object.__setattr__(self, "dataset_path", Path(self.dataset_path))
        if self.dataset_size < 1:
            raise ConfigError(f"dataset size must be at least 1, got {self.dataset_size}")
        if not self.seeds:
            raise ConfigError("at least one seed is required")
        if len(set(self.seeds)) != len(self.seeds):
            raise ConfigError(f"seeds must be distinct, got {self.seeds}")
        if not self.alphas or any(a <= 0 for a in self.alphas):
            raise ConfigError(f"alphas must be a nonempty list of positive values, got {self.alphas}")

    def header(self) -> Dict[str, str]:
        """Flat ``key=value`` view written into every metrics file header."""
        entries = {
            "env": self.env.env_id,
            "discount": repr(self.env.discount),
            "tier": self.tier.value,
            "dataset_size": str(self.dataset_size),
        }
        for f in fields(self.train):
            entries[f"train.{f.name}"] = repr(getattr(self.train, f.name))
        return entries

    def with_train(self, **changes: Any) -> "RunConfig":
        try:
            return replace(self, train=replace(self.train, **changes))
        except TypeError as e:
            raise ConfigError(str(e)) from e


_SECTIONS = ("env", "data", "train", "run")
_DATA_KEYS = {"tier": str, "size": int, "path": str}
_RUN_KEYS = {"scheme": str, "seeds": "ints", "alphas": "floats", "out_dir": str}


def _schema(section: str) -> Dict[str, Any]:
    if section == "env":
        return {f.name: type(getattr(EnvSpec(), f.name)) for f in fields(EnvSpec)}
    if section == "train":
        return {f.name: type(getattr(TrainConfig(), f.name)) for f in fields(TrainConfig)}
    return _DATA_KEYS if section == "data" else _RUN_KEYS


def _coerce(section: str, key: str, raw: str, kind: Any) -> Any:
    try:
        if kind == "ints":
            return tuple(int(v) for v in raw.replace(",", " ").split())
        if kind == "floats":
            return tuple(float(v) for v in raw.replace(",", " ").split())
        if kind is bool:
            return raw.strip().lower() in ("1", "true", "yes", "on")
        return kind(raw.strip())
    except ValueError as e:
        raise ConfigError(f"[{section}] {key}: cannot read {raw!r} as {getattr(kind, '__name__', kind)}") from e


def parse_config_file(path: Union[str, Path]) -> Dict[str, Dict[str, Any]]:
    """Reads a run config file into typed per-section values.

    Raises:
        ConfigError: On unknown sections or keys and on values of the wrong type.
    """
    parser = configparser.ConfigParser(interpolation=None)
    try:
        with open(path) as handle:
            parser.read_file(handle)
    except (OSError, configparser.Error) as e:
        raise ConfigError(f"cannot read config file {path}: {e}") from e
    values: Dict[str, Dict[str, Any]] = {}
    for section in parser.sections():
        if section not in _SECTIONS:
            raise ConfigError(f"{path}: unknown section [{section}]")
        schema = _schema(section)
        values[section] = {}
        for key, raw in parser.items(section):
            if key not in schema:
                raise ConfigError(f"{path}: unknown key {key!r} in [{section}]")
            values[section][key] = _coerce(section, key, raw, schema[key])
    logger.debug("Read config %s: %s", path, values)
    return values


def build_run_config(
    sections: Optional[Mapping[str, Mapping[str, Any]]] = None,
    base: Optional[RunConfig] = None,
) -> RunConfig:
    """Applies per-section values on top of ``base`` (defaults if None).

    ``None`` values are skipped, so CLI flags that were not given leave the
    file or default value in place.
    """
    cfg = base or RunConfig()
    sections = {name: {k: v for k, v in (values or {}).items() if v is not None}
                for name, values in (sections or {}).items()}
    try:
        env = replace(cfg.env, **sections.get("env", {}))
        train = replace(cfg.train, **sections.get("train", {}))
        data, run = sections.get("data", {}), sections.get("run", {})
        return replace(
            cfg,
            env=env,
            train=train,
            tier=data.get("tier", cfg.tier),
            dataset_size=data.get("size", cfg.dataset_size),
            dataset_path=data.get("path", cfg.dataset_path),
            scheme=run.get("scheme", cfg.scheme),
            seeds=run.get("seeds", cfg.seeds),
            alphas=run.get("alphas", cfg.alphas),
            out_dir=run.get("out_dir", cfg.out_dir),
        )
    except TypeError as e:
        raise ConfigError(str(e)) from e


def load_run_config(
    path: Optional[Union[str, Path]] = None,
    overrides: Optional[Mapping[str, Mapping[str, Any]]] = None,
) -> RunConfig:
    """Defaults, then the config file, then ``overrides`` (typically CLI flags)."""
    cfg = build_run_config(parse_config_file(path)) if path else RunConfig()
    return build_run_config(overrides, base=cfg)
