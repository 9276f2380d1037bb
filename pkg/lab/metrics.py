"""Per-epoch training metrics and their CSV form.

A metrics file starts with ``# key=value`` run-header lines followed by a
plain CSV table. Wall-clock times go to a separate ``*.timing.csv`` so two
runs with the same config and seed produce byte-identical metrics files.
"""

import logging
import math
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Dict, List, Optional, Union

import numpy as np
import pandas as pd

logger = logging.getLogger(__name__)

FLOAT_FORMAT = "%.17g"


@dataclass
class EpochMetrics:
    epoch: int
    expected_return: float
    offline_fraction: float = math.nan
    expected_offline_fraction: float = math.nan
    mean_uncertainty: float = math.nan
    policy_uncertainty: float = math.nan
    model_return: float = math.nan
    relative_uncertainty_error: float = math.nan
    model_shift: float = math.nan
    model_error: float = math.nan
    model_refits: int = 0
    wall_clock_seconds: float = 0.0


COLUMNS = tuple(f.name for f in fields(EpochMetrics) if f.name != "wall_clock_seconds")


def relative_uncertainty_error(current: EpochMetrics, following: EpochMetrics) -> float:
    """|U_t - U_{t+1}| / |eta_t| for consecutive epochs, NaN if eta_t is 0."""
    scale = abs(current.model_return)
    if scale == 0 or math.isnan(scale):
        return math.nan
    return abs(current.policy_uncertainty - following.policy_uncertainty) / scale


@dataclass
class MetricsLog:
    """Ordered epoch rows plus a flat run header."""

    header: Dict[str, str]
    rows: List[EpochMetrics] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.rows)

    def append(self, row: EpochMetrics) -> None:
        """Adds the next epoch and fills the previous row's relative uncertainty error."""
        if self.rows:
            if row.epoch != self.rows[-1].epoch + 1:
                raise ValueError(
                    f"epochs must be consecutive, got {row.epoch} after {self.rows[-1].epoch}"
                )
            self.rows[-1].relative_uncertainty_error = relative_uncertainty_error(
                self.rows[-1], row
            )
        row.relative_uncertainty_error = math.nan
        self.rows.append(row)

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(row, name) for row in self.rows], dtype=float)

    def returns(self) -> np.ndarray:
        return self.column("expected_return")

    @property
    def eta_off(self) -> float:
        return float(self.header.get("eta_off", "nan"))

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame([asdict(row) for row in self.rows], columns=list(COLUMNS))

    def to_csv_text(self) -> str:
        lines = "".join(f"# {key}={value}\n" for key, value in self.header.items())
        table = self.to_frame().to_csv(index=False, float_format=FLOAT_FORMAT, na_rep="nan")
        return lines + table

    def to_csv(self, path: Union[str, Path], timing: bool = True) -> None:
        """Writes the metrics file and, unless disabled, its timing sidecar."""
        path = Path(path)
        path.write_text(self.to_csv_text())
        if timing:
            times = pd.DataFrame({
                "epoch": [row.epoch for row in self.rows],
                "wall_clock_seconds": [row.wall_clock_seconds for row in self.rows],
            })
            times.to_csv(timing_path(path), index=False, float_format="%.6f")
        logger.debug("Wrote %d epochs to %s", len(self.rows), path)

    @classmethod
    def from_csv(cls, path: Union[str, Path]) -> "MetricsLog":
        path = Path(path)
        header = {}
        for line in path.read_text().splitlines():
            if not line.startswith("#"):
                break
            key, _, value = line[1:].strip().partition("=")
            header[key] = value
        frame = pd.read_csv(path, comment="#")
        missing = set(COLUMNS) - set(frame.columns)
        if missing:
            raise ValueError(f"{path}: missing metrics columns {sorted(missing)}")
        seconds = _read_timing(path, len(frame))
        rows = [
            EpochMetrics(
                **{name: _cell(name, record[name]) for name in COLUMNS},
                wall_clock_seconds=seconds[i],
            )
            for i, record in enumerate(frame.to_dict("records"))
        ]
        return cls(header=header, rows=rows)


def timing_path(path: Union[str, Path]) -> Path:
    path = Path(path)
    return path.with_name(path.stem + ".timing.csv")


def _read_timing(path: Path, count: int) -> List[float]:
    sidecar = timing_path(path)
    if not sidecar.exists():
        return [0.0] * count
    seconds = pd.read_csv(sidecar)["wall_clock_seconds"].tolist()
    return seconds if len(seconds) == count else [0.0] * count


def _cell(name: str, value) -> Union[int, float]:
    if name in ("epoch", "model_refits"):
        return int(value)
    return float(value)


def stack_column(logs: List[MetricsLog], name: str, epochs: Optional[int] = None) -> np.ndarray:
    """Column ``name`` of every log as a (runs, epochs) array, truncated to the shortest."""
    if not logs:
        raise ValueError("need at least one metrics log")
    length = min(len(log) for log in logs) if epochs is None else epochs
    return np.stack([log.column(name)[:length] for log in logs])
