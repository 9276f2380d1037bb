"""Ablation orchestration, transfer metrics, reports and acceptance checks.

Every (label, seed) cell of an ablation shares the seed's environment,
offline dataset and offline artifacts with the other labels, so schemes
and alpha values are compared on paired seeds.
"""

import asyncio
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Iterable, List, NamedTuple, Optional, Sequence, Union

import numpy as np
import pandas as pd

import lab
from lab.agent import OfflineArtifacts, Scheme, train_offline, train_online
from lab.config import RunConfig
from lab.envs import (
    Dataset,
    Stepper,
    build_env,
    generate_offline_dataset,
    load_dataset,
    make_behavior_policy,
)
from lab.errors import ConfigError
from lab.mdp_core import FiniteMdp
from lab.metrics import FLOAT_FORMAT, MetricsLog, stack_column
from lab.plots import write_plot_scripts

logger = logging.getLogger(__name__)

DIP_WINDOW = 5
THRESHOLD_FRACTION = 0.95
MIN_ABLATION_SEEDS = 3

Results = Dict[str, List[MetricsLog]]


@dataclass
class PreparedSeed:
    """Environment, D_off and offline artifacts shared by all cells of one seed."""

    seed: int
    mdp: FiniteMdp
    dataset: Dataset
    offline: OfflineArtifacts


def prepare_seed(cfg: RunConfig, seed: int) -> PreparedSeed:
    """Builds the environment, loads or generates D_off and runs the offline stage."""
    mdp, stepper = build_env(cfg.env, seed)
    if cfg.dataset_path is not None:
        dataset = load_dataset(cfg.dataset_path)
    else:
        behavior = make_behavior_policy(mdp, cfg.tier, seed)
        dataset = generate_offline_dataset(
            stepper, behavior, cfg.dataset_size, seed, cfg.tier, cfg.env.env_id
        )
    offline = train_offline(
        dataset, cfg.train, mdp.num_states, mdp.num_actions, mdp.discount, seed=seed
    )
    return PreparedSeed(seed, mdp, dataset, offline)


def run_cell(
    cfg: RunConfig, prepared: PreparedSeed, scheme: Scheme, label: str, alpha: Optional[float] = None
) -> MetricsLog:
    """One online run on a prepared seed."""
    if alpha is not None:
        cfg = cfg.with_train(alpha=alpha)
    header = {"label": label, "version": lab.__version__}
    header.update(cfg.header())
    stepper = Stepper(prepared.mdp, cfg.env.horizon)
    return train_online(
        prepared.offline, stepper, cfg.train, scheme, prepared.mdp, seed=prepared.seed, header=header
    )


async def _prepare_all(cfg: RunConfig) -> List[PreparedSeed]:
    loop = asyncio.get_running_loop()
    return list(await asyncio.gather(
        *(loop.run_in_executor(None, prepare_seed, cfg, seed) for seed in cfg.seeds)
    ))


async def _run_grid(cfg: RunConfig, cells: Sequence[tuple]) -> Results:
    """Runs (label, scheme, alpha) cells on every seed and groups the logs by label."""
    prepared = await _prepare_all(cfg)
    loop = asyncio.get_running_loop()
    jobs = [
        (label, loop.run_in_executor(None, run_cell, cfg, seed_data, scheme, label, alpha))
        for label, scheme, alpha in cells
        for seed_data in prepared
    ]
    logs = await asyncio.gather(*(job for _, job in jobs))
    results: Results = {label: [] for label, _, _ in cells}
    for (label, _), log in zip(jobs, logs):
        results[label].append(log)
    return results


def _warn_few_seeds(cfg: RunConfig) -> None:
    if len(cfg.seeds) < MIN_ABLATION_SEEDS:
        logger.warning(
            "Ablation with %d seed(s); paired comparisons want at least %d",
            len(cfg.seeds), MIN_ABLATION_SEEDS,
        )


async def run_ablation_schemes_async(
    cfg: RunConfig, schemes: Iterable[Union[Scheme, str]] = tuple(Scheme)
) -> Results:
    _warn_few_seeds(cfg)
    schemes = [Scheme(s) for s in schemes]
    logger.info("Scheme ablation: %s over seeds %s", [s.value for s in schemes], cfg.seeds)
    return await _run_grid(cfg, [(s.value, s, None) for s in schemes])


def run_ablation_schemes(
    cfg: RunConfig, schemes: Iterable[Union[Scheme, str]] = tuple(Scheme)
) -> Results:
    """Runs every scheme on the paired seeds of ``cfg``.

    Returns:
        Results: Scheme name to one MetricsLog per seed, in seed order.
    """
    return asyncio.run(run_ablation_schemes_async(cfg, schemes))


def alpha_label(alpha: float) -> str:
    return f"alpha={alpha!r}"


async def run_alpha_sweep_async(cfg: RunConfig, alphas: Optional[Sequence[float]] = None) -> Results:
    alphas = tuple(cfg.alphas if alphas is None else alphas)
    if not alphas:
        raise ConfigError("the alpha sweep needs at least one alpha")
    if any(a <= 0 for a in alphas):
        raise ConfigError(f"alpha must be positive, got {alphas}")
    _warn_few_seeds(cfg)
    logger.info("Alpha sweep over %s, scheme %s", alphas, cfg.scheme.value)
    return await _run_grid(cfg, [(alpha_label(a), cfg.scheme, a) for a in alphas])


def run_alpha_sweep(cfg: RunConfig, alphas: Optional[Sequence[float]] = None) -> Results:
    """Runs the configured scheme once per alpha on the paired seeds."""
    return asyncio.run(run_alpha_sweep_async(cfg, alphas))


class TransferMetrics(NamedTuple):
    dip: float
    epochs_to_recover: int
    epochs_to_threshold: int


def compute_transfer_metrics(
    log: Union[MetricsLog, Sequence[float]],
    eta_off: float,
    threshold: Optional[float] = None,
) -> TransferMetrics:
    """Dip below eta_off and adaptation speed of one learning curve.

    Args:
        log (Union[MetricsLog, Sequence[float]]): A log or its per-epoch returns.
        eta_off (float): Exact return of the offline policy.
        threshold (Optional[float]): Target return; 95% of the curve's best
            return when None.

    Returns:
        TransferMetrics: dip = max(0, eta_off - min of the first five epochs);
        the recovery epoch is 1 without a dip, else the first epoch from that
        minimum on whose return is at least eta_off; the threshold epoch is
        the first epoch at or above the threshold. Epochs are 1-based, -1
        means never.
    """
    returns = np.asarray(log.returns() if isinstance(log, MetricsLog) else log, dtype=float)
    if returns.size == 0:
        raise ValueError("transfer metrics need a nonempty learning curve")
    window = returns[:DIP_WINDOW]
    dip = max(0.0, float(eta_off - window.min()))
    if dip == 0.0:
        recover = 1
    else:
        low = int(window.argmin())
        recovered = np.flatnonzero(returns[low:] >= eta_off)
        recover = int(low + recovered[0] + 1) if recovered.size else -1
    if threshold is None:
        threshold = THRESHOLD_FRACTION * float(returns.max())
    reached = np.flatnonzero(returns >= threshold)
    return TransferMetrics(dip, recover, int(reached[0] + 1) if reached.size else -1)


def _thirds(values: np.ndarray) -> tuple:
    third = max(1, len(values) // 3)
    return values[:third], values[-third:]


def uncertainty_decay_ratio(log: MetricsLog) -> float:
    """Mean u over online-visited pairs, last third of training over first third."""
    first, last = _thirds(log.column("mean_uncertainty"))
    start = np.nanmean(first)
    return float(np.nanmean(last) / start) if start > 0 else float("nan")


def small_error_share(log: MetricsLog, limit: float = 0.2) -> float:
    """Share of relative uncertainty errors below ``limit`` in the second half of training."""
    errors = log.column("relative_uncertainty_error")
    tail = errors[len(errors) // 2:]
    tail = tail[~np.isnan(tail)]
    return float(np.mean(tail < limit)) if tail.size else float("nan")


def _seed_of(log: MetricsLog) -> int:
    return int(log.header.get("seed", -1))


def comparison_frame(results: Results) -> pd.DataFrame:
    """One row per (label, seed): dip, adaptation epochs and uncertainty statistics.

    The threshold of a seed is 95% of the best final return any label reached on it.
    """
    if not results or not any(results.values()):
        raise ValueError("no metrics logs to compare")
    best_final: Dict[int, float] = {}
    for logs in results.values():
        for log in logs:
            seed = _seed_of(log)
            best_final[seed] = max(best_final.get(seed, -np.inf), float(log.returns()[-1]))
    rows = []
    for label, logs in results.items():
        for log in logs:
            seed = _seed_of(log)
            metrics = compute_transfer_metrics(
                log, log.eta_off, THRESHOLD_FRACTION * best_final[seed]
            )
            rows.append({
                "label": label,
                "seed": seed,
                "eta_off": log.eta_off,
                "final_return": float(log.returns()[-1]),
                "dip": metrics.dip,
                "epochs_to_recover": metrics.epochs_to_recover,
                "epochs_to_threshold": metrics.epochs_to_threshold,
                "uncertainty_decay": uncertainty_decay_ratio(log),
                "small_error_share": small_error_share(log),
            })
    return pd.DataFrame(rows)


def summary_frame(comparison: pd.DataFrame) -> pd.DataFrame:
    """Medians per label, plus the spread of final returns across labels."""
    grouped = comparison.groupby("label", sort=False)
    summary = grouped[[
        "eta_off", "final_return", "dip", "epochs_to_threshold",
        "uncertainty_decay", "small_error_share",
    ]].median().reset_index()
    summary["seeds"] = grouped.size().values
    finals = summary["final_return"]
    summary["final_return_spread"] = float(finals.max() - finals.min())
    return summary


def learning_curves_frame(results: Results, column: str = "expected_return") -> pd.DataFrame:
    """Median curve per label, one column per label."""
    curves = {"epoch": None}
    for label, logs in results.items():
        values = stack_column(logs, column)
        curves[label] = np.median(values, axis=0)
        if curves["epoch"] is None:
            curves["epoch"] = np.arange(1, values.shape[1] + 1)
    return pd.DataFrame(curves)


def _run_name(label: str, seed: int) -> str:
    return f"{label.replace('=', '_')}_seed{seed}.csv"


def emit_report(results: Results, out_dir: Union[str, Path]) -> List[Path]:
    """Writes run logs, comparison tables and plot scripts under ``out_dir``.

    Raises:
        ValueError: When there are no logs.
        OSError: When ``out_dir`` is not writable.
    """
    if not results or not any(results.values()):
        raise ValueError("emit_report needs at least one metrics log")
    out_dir = Path(out_dir)
    runs_dir = out_dir / "runs"
    runs_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for label, logs in results.items():
        for log in logs:
            path = runs_dir / _run_name(label, _seed_of(log))
            log.header.setdefault("label", label)
            log.to_csv(path)
            written.append(path)
    comparison = comparison_frame(results)
    tables = {
        "comparison.csv": comparison,
        "summary.csv": summary_frame(comparison),
        "learning_curves.csv": learning_curves_frame(results),
    }
    for name, frame in tables.items():
        frame.to_csv(out_dir / name, index=False, float_format=FLOAT_FORMAT, na_rep="nan")
        written.append(out_dir / name)
    written.extend(write_plot_scripts(out_dir))
    logger.info("Report with %d labels written to %s", len(results), out_dir)
    return written


def load_results(out_dir: Union[str, Path]) -> Results:
    """Reads the run logs of a report directory back, grouped by label."""
    runs = sorted((Path(out_dir) / "runs").glob("*_seed*.csv"))
    runs = [path for path in runs if not path.name.endswith(".timing.csv")]
    if not runs:
        raise ValueError(f"no run logs under {Path(out_dir) / 'runs'}")
    results: Results = {}
    for path in runs:
        log = MetricsLog.from_csv(path)
        results.setdefault(log.header.get("label", path.stem), []).append(log)
    for logs in results.values():
        logs.sort(key=_seed_of)
    return results


class AcceptanceResult(NamedTuple):
    name: str
    passed: bool
    detail: str


def check_acceptance(
    comparison: pd.DataFrame,
    treatment: str = Scheme.PRIORITIZED.value,
    baseline: str = Scheme.PURE_ONLINE.value,
) -> List[AcceptanceResult]:
    """Ablation-level properties of the prioritized scheme.

    Covers smooth transfer, fast adaptation, uncertainty decay and small
    relative uncertainty error, each as a median over seeds.
    """
    labels = set(comparison["label"])
    missing = {treatment, baseline} - labels
    if missing:
        raise ValueError(f"acceptance checks need labels {sorted(missing)}")
    ours = comparison[comparison["label"] == treatment]
    theirs = comparison[comparison["label"] == baseline]
    epochs = ours["epochs_to_threshold"].to_numpy()
    horizon = float(max(epochs.max(), theirs["epochs_to_threshold"].max(), 0)) + 1.0

    def adapt(frame: pd.DataFrame) -> float:
        values = frame["epochs_to_threshold"].to_numpy(dtype=float)
        return float(np.median(np.where(values < 0, horizon, values)))

    our_dip, their_dip = float(ours["dip"].median()), float(theirs["dip"].median())
    eta_off = abs(float(ours["eta_off"].median()))
    decay = float(ours["uncertainty_decay"].median())
    share = float(ours["small_error_share"].median())
    results = [
        AcceptanceResult(
            "smooth_transfer",
            our_dip <= their_dip and our_dip <= 0.1 * eta_off,
            f"median dip {our_dip:.4g} vs {baseline} {their_dip:.4g}, 10% of eta_off {0.1 * eta_off:.4g}",
        ),
        AcceptanceResult(
            "fast_adaptation",
            adapt(ours) <= 1.5 * adapt(theirs),
            f"median epochs to threshold {adapt(ours):.3g} vs {baseline} {adapt(theirs):.3g}",
        ),
        AcceptanceResult(
            "uncertainty_decay",
            decay <= 0.5,
            f"median last/first-third mean uncertainty {decay:.4g}",
        ),
        AcceptanceResult(
            "small_uncertainty_error",
            share >= 0.8,
            f"median share of relative uncertainty errors below 0.2: {share:.4g}",
        ),
    ]
    for result in results:
        log = logger.info if result.passed else logger.warning
        log("%s %s: %s", result.name, "passed" if result.passed else "FAILED", result.detail)
    return results
