"""Unit tests for ablations, transfer metrics, reports and acceptance checks."""

from dataclasses import replace

import pandas as pd
import pytest

from lab.agent import Scheme, TrainConfig
from lab.config import RunConfig
from lab.envs import EnvSpec
from lab.errors import ConfigError
from lab.experiment import (
    alpha_label,
    check_acceptance,
    comparison_frame,
    compute_transfer_metrics,
    emit_report,
    learning_curves_frame,
    load_results,
    prepare_seed,
    run_ablation_schemes,
    run_ablation_schemes_async,
    run_alpha_sweep,
    run_cell,
    summary_frame,
)
from lab.metrics import EpochMetrics, MetricsLog

TINY = RunConfig(
    env=EnvSpec("gridworld", 3, 0.1, 20, 0.9),
    dataset_size=200,
    train=TrainConfig(
        epochs=2, steps_per_epoch=20, model_update_freq=10, rollout_batch=50,
        updates_per_step=2, batch_size=32, offline_rounds=5, ensemble_size=3,
    ),
    seeds=(0,),
)


@pytest.fixture(scope="module")
def scheme_results():
    """One-seed, two-epoch run of every scheme."""
    return run_ablation_schemes(TINY)


def synthetic_log(label: str, seed: int, returns, eta_off: float = 1.0) -> MetricsLog:
    log = MetricsLog(header={"label": label, "seed": str(seed), "eta_off": repr(eta_off)})
    for epoch, value in enumerate(returns, start=1):
        log.append(EpochMetrics(epoch=epoch, expected_return=value))
    return log


def test_transfer_metrics_examples():
    assert compute_transfer_metrics([10, 7, 8, 12], 10.0)[:2] == (3.0, 4)
    rising = compute_transfer_metrics([1.0, 2.0, 3.0, 4.0], 1.0)
    assert rising.dip == 0.0
    assert rising.epochs_to_threshold == 4
    flat = compute_transfer_metrics([5.0, 5.0, 6.0], 5.0)
    assert (flat.dip, flat.epochs_to_recover) == (0.0, 1)
    never = compute_transfer_metrics([1.0, 0.5, 0.8], 2.0, threshold=3.0)
    assert never.epochs_to_recover == -1 and never.epochs_to_threshold == -1
    with pytest.raises(ValueError):
        compute_transfer_metrics([], 1.0)


def test_transfer_metrics_only_look_at_the_first_epochs():
    metrics = compute_transfer_metrics([5, 5, 5, 5, 5, 0, 5], 5.0)
    assert metrics.dip == 0.0
    assert metrics.epochs_to_recover == 1


def test_no_dip_means_recovered_at_the_first_epoch():
    above = compute_transfer_metrics([0.63, 0.64, 0.65, 0.66, 0.62, 0.7], -0.2)
    assert (above.dip, above.epochs_to_recover) == (0.0, 1)
    deep = compute_transfer_metrics([9.0, 11.0, 7.0, 12.0], 10.0)
    assert (deep.dip, deep.epochs_to_recover) == (3.0, 4)


def test_one_seed_gives_one_log_per_scheme(scheme_results):
    assert list(scheme_results) == [s.value for s in Scheme]
    for label, logs in scheme_results.items():
        assert len(logs) == 1
        assert len(logs[0]) == 2
        assert logs[0].header["label"] == label
        assert logs[0].header["train.epochs"] == "2"


def test_schemes_share_the_offline_stage(scheme_results):
    etas = {logs[0].header["eta_off"] for logs in scheme_results.values()}
    assert len(etas) == 1


@pytest.mark.asyncio
async def test_ablation_async_matches_sync(scheme_results):
    results = await run_ablation_schemes_async(TINY, ["uniform"])
    assert results["uniform"][0].to_csv_text() == scheme_results["uniform"][0].to_csv_text()


def test_uniform_scheme_ignores_alpha():
    cfg = replace(TINY, scheme=Scheme.UNIFORM)
    results = run_alpha_sweep(cfg, (0.5, 2.0))
    assert list(results) == [alpha_label(0.5), alpha_label(2.0)]
    first, second = (results[label][0].to_frame() for label in results)
    pd.testing.assert_frame_equal(first, second)


def test_single_alpha_is_a_plain_train_run():
    sweep = run_alpha_sweep(TINY, (1.0,))
    plain = run_cell(TINY, prepare_seed(TINY, 0), TINY.scheme, "plain")
    pd.testing.assert_frame_equal(sweep[alpha_label(1.0)][0].to_frame(), plain.to_frame())


@pytest.mark.parametrize("alphas", [(), (1.0, -2.0), (0.0,)])
def test_alpha_sweep_rejects_bad_grids(alphas):
    with pytest.raises(ConfigError):
        run_alpha_sweep(TINY, alphas)


def test_comparison_uses_best_final_return_per_seed():
    results = {
        "a": [synthetic_log("a", 0, [0.5, 0.9, 1.0])],
        "b": [synthetic_log("b", 0, [0.8, 1.6, 2.0])],
    }
    comparison = comparison_frame(results).set_index("label")
    assert comparison.loc["a", "epochs_to_threshold"] == -1
    assert comparison.loc["b", "epochs_to_threshold"] == 3
    assert comparison.loc["a", "dip"] == pytest.approx(0.5)
    assert comparison.loc["b", "final_return"] == 2.0
    with pytest.raises(ValueError):
        comparison_frame({})


def test_summary_reports_final_return_spread():
    results = {
        "a": [synthetic_log("a", 0, [1.0, 1.0]), synthetic_log("a", 1, [1.0, 3.0])],
        "b": [synthetic_log("b", 0, [1.0, 4.0]), synthetic_log("b", 1, [1.0, 6.0])],
    }
    summary = summary_frame(comparison_frame(results)).set_index("label")
    assert summary.loc["a", "final_return"] == 2.0
    assert summary.loc["b", "final_return"] == 5.0
    assert summary.loc["a", "seeds"] == 2
    assert summary["final_return_spread"].iloc[0] == 3.0


def test_learning_curves_have_one_series_per_label(scheme_results):
    curves = learning_curves_frame(scheme_results)
    assert list(curves.columns) == ["epoch"] + [s.value for s in Scheme]
    assert curves["epoch"].tolist() == [1, 2]


def test_emit_report_writes_tables_and_scripts(tmp_path, scheme_results):
    written = emit_report(scheme_results, tmp_path)
    names = {path.name for path in written}
    assert {"comparison.csv", "summary.csv", "learning_curves.csv"} <= names
    assert any(name.endswith(".py") for name in names)
    assert (tmp_path / "runs" / "half_half_seed0.csv").exists()
    comparison = pd.read_csv(tmp_path / "comparison.csv")
    assert sorted(comparison["label"]) == sorted(s.value for s in Scheme)


def test_emit_report_is_byte_identical(tmp_path, scheme_results):
    emit_report(scheme_results, tmp_path / "first")
    emit_report(scheme_results, tmp_path / "second")
    for name in ("comparison.csv", "summary.csv", "learning_curves.csv", "runs/uniform_seed0.csv"):
        assert (tmp_path / "first" / name).read_bytes() == (tmp_path / "second" / name).read_bytes()


def test_emit_report_rejects_empty_results(tmp_path):
    with pytest.raises(ValueError):
        emit_report({}, tmp_path)
    with pytest.raises(ValueError):
        emit_report({"prioritized": []}, tmp_path)


def test_load_results_restores_labels(tmp_path):
    results = {
        alpha_label(0.5): [synthetic_log(alpha_label(0.5), 1, [1.0, 2.0]),
                           synthetic_log(alpha_label(0.5), 0, [1.0, 1.5])],
    }
    emit_report(results, tmp_path)
    loaded = load_results(tmp_path)
    assert list(loaded) == ["alpha=0.5"]
    assert [log.header["seed"] for log in loaded["alpha=0.5"]] == ["0", "1"]
    with pytest.raises(ValueError):
        load_results(tmp_path / "missing")


def comparison_rows(label: str, dip: float, threshold: int, decay: float, share: float):
    return [
        {"label": label, "seed": seed, "eta_off": 1.0, "final_return": 1.5, "dip": dip,
         "epochs_to_recover": 1, "epochs_to_threshold": threshold,
         "uncertainty_decay": decay, "small_error_share": share}
        for seed in range(3)
    ]


def test_acceptance_passes_on_good_comparison():
    frame = pd.DataFrame(
        comparison_rows("prioritized", 0.02, 4, 0.3, 0.9)
        + comparison_rows("pure_online", 0.4, 5, 0.3, 0.5)
    )
    results = check_acceptance(frame)
    assert [r.name for r in results] == [
        "smooth_transfer", "fast_adaptation", "uncertainty_decay", "small_uncertainty_error"
    ]
    assert all(r.passed for r in results)


def test_acceptance_flags_each_failure():
    frame = pd.DataFrame(
        comparison_rows("prioritized", 0.5, -1, 0.9, 0.1)
        + comparison_rows("pure_online", 0.1, 1, 0.3, 0.9)
    )
    assert not any(r.passed for r in check_acceptance(frame))


def test_acceptance_on_a_short_real_ablation():
    cfg = replace(
        TINY,
        seeds=(0, 1, 2),
        train=replace(TINY.train, epochs=6, steps_per_epoch=40, model_update_freq=20),
    )
    results = run_ablation_schemes(cfg, ["prioritized", "pure_online"])
    comparison = comparison_frame(results)
    assert len(comparison) == 6
    ours = comparison[comparison["label"] == "prioritized"]
    assert ours["uncertainty_decay"].notna().all()
    assert ours["uncertainty_decay"].median() < 1.0
    checks = check_acceptance(comparison)
    assert [r.name for r in checks] == [
        "smooth_transfer", "fast_adaptation", "uncertainty_decay", "small_uncertainty_error"
    ]
    decay = next(r for r in checks if r.name == "uncertainty_decay")
    assert decay.passed == (ours["uncertainty_decay"].median() <= 0.5)


def test_acceptance_needs_both_labels():
    frame = pd.DataFrame(comparison_rows("prioritized", 0.0, 1, 0.1, 1.0))
    with pytest.raises(ValueError):
        check_acceptance(frame)
