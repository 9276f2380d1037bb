"""Self-contained plotting scripts written next to a report.

The package never imports matplotlib; each script reads the report CSVs
with pandas and is meant to be run by hand from the report directory.
"""

import logging
from pathlib import Path
from typing import Dict, List, Union

logger = logging.getLogger(__name__)

_PREAMBLE = '''"""Generated by moore report; run from the report directory."""
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
import pandas as pd  # noqa: E402

HERE = Path(__file__).resolve().parent


def load_runs():
    runs = {}
    for path in sorted((HERE / "runs").glob("*_seed*.csv")):
        if path.name.endswith(".timing.csv"):
            continue
        label = path.stem.rsplit("_seed", 1)[0]
        for line in path.read_text().splitlines():
            if line.startswith("# label="):
                label = line.split("=", 1)[1]
            if not line.startswith("#"):
                break
        runs.setdefault(label, []).append(pd.read_csv(path, comment="#"))
    return runs

'''

_LEARNING_CURVES = _PREAMBLE + '''
curves = pd.read_csv(HERE / "learning_curves.csv")
fig, ax = plt.subplots(figsize=(7, 4.5))
for label in curves.columns[1:]:
    ax.plot(curves["epoch"], curves[label], label=label)
ax.set_xlabel("online epoch")
ax.set_ylabel("exact return (median over seeds)")
ax.legend(frameon=False)
fig.tight_layout()
fig.savefig(HERE / "learning_curves.png", dpi=150)
'''

_UNCERTAINTY_DECAY = _PREAMBLE + '''
fig, ax = plt.subplots(figsize=(7, 4.5))
for label, frames in load_runs().items():
    values = np.stack([frame["mean_uncertainty"].to_numpy() for frame in frames])
    epochs = frames[0]["epoch"].to_numpy()
    low, mid, high = np.nanpercentile(values, [20, 50, 80], axis=0)
    ax.plot(epochs, mid, label=label)
    ax.fill_between(epochs, low, high, alpha=0.2)
ax.set_xlabel("online epoch")
ax.set_ylabel("mean uncertainty over visited pairs")
ax.legend(frameon=False)
fig.tight_layout()
fig.savefig(HERE / "uncertainty_decay.png", dpi=150)
'''

_RELATIVE_ERROR = _PREAMBLE + '''
fig, ax = plt.subplots(figsize=(7, 4.5))
for label, frames in load_runs().items():
    values = np.concatenate([frame["relative_uncertainty_error"].to_numpy() for frame in frames])
    values = values[np.isfinite(values)]
    if values.size:
        ax.hist(values, bins=30, density=True, histtype="step", label=label)
ax.axvline(0.2, color="grey", linestyle="--", linewidth=1)
ax.set_xlabel("relative uncertainty error")
ax.set_ylabel("density")
ax.legend(frameon=False)
fig.tight_layout()
fig.savefig(HERE / "relative_uncertainty_error.png", dpi=150)
'''

PLOT_SCRIPTS: Dict[str, str] = {
    "plot_learning_curves.py": _LEARNING_CURVES,
    "plot_uncertainty_decay.py": _UNCERTAINTY_DECAY,
    "plot_relative_uncertainty_error.py": _RELATIVE_ERROR,
}


def write_plot_scripts(out_dir: Union[str, Path]) -> List[Path]:
    paths = []
    for name, source in PLOT_SCRIPTS.items():
        path = Path(out_dir) / name
        path.write_text(source)
        paths.append(path)
    logger.debug("Wrote %d plot scripts to %s", len(paths), out_dir)
    return paths
