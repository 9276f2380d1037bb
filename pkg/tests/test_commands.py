"""Tests for the moore subcommands and their exit statuses."""

import argparse
from unittest.mock import AsyncMock

import pandas as pd
import pytest

import moore
from commands import EXIT_ACCEPTANCE, EXIT_CONFIG, EXIT_OK, EXIT_VIOLATION, out_root, run_overrides
from lab.envs import load_dataset
from lab.errors import ConfigError
from lab.experiment import emit_report
from lab.metrics import EpochMetrics, MetricsLog
from lab.theory_verify import BoundReport, summarize

TINY_INI = """
[env]
family = gridworld
size = 3
slip = 0.1
horizon = 20

[data]
size = 200

[train]
epochs = 2
steps_per_epoch = 20
model_update_freq = 10
rollout_batch = 50
updates_per_step = 2
batch_size = 32
offline_rounds = 5
ensemble_size = 3
"""


@pytest.fixture
def tiny_config(tmp_path):
    path = tmp_path / "tiny.ini"
    path.write_text(TINY_INI)
    return path


@pytest.fixture(autouse=True)
def out_dir(monkeypatch, tmp_path):
    """Keeps default outputs inside the test's temporary directory."""
    monkeypatch.setenv("MOORE_OUT_DIR", str(tmp_path / "default"))
    return tmp_path / "default"


def flat_log(label: str, seed: int) -> MetricsLog:
    log = MetricsLog(header={"label": label, "seed": str(seed), "eta_off": "0.5"})
    for epoch in range(1, 4):
        log.append(EpochMetrics(epoch=epoch, expected_return=0.5))
    return log


@pytest.fixture
def synthetic_runs(tmp_path):
    runs = tmp_path / "runs_dir"
    emit_report({label: [flat_log(label, 0)] for label in ("prioritized", "pure_online")}, runs)
    return runs


def test_every_command_is_registered():
    loaded = moore.load_commands(argparse.ArgumentParser().add_subparsers())
    assert loaded == [
        "commands.ablate", "commands.gen_data", "commands.report", "commands.train", "commands.verify"
    ]


@pytest.mark.asyncio
async def test_no_command_is_a_config_error():
    assert await moore.main([]) == EXIT_CONFIG


@pytest.mark.asyncio
async def test_verify_writes_reports(tmp_path):
    path = tmp_path / "bounds" / "verify.csv"
    assert await moore.main(["verify", "--seeds", "3", "--out", str(path)]) == EXIT_OK
    frame = pd.read_csv(path)
    assert set(frame["seed"]) == {0, 1, 2}
    summary = pd.read_csv(path.with_name("verify.summary.csv"))
    assert summary["violations"].sum() == 0


@pytest.mark.asyncio
async def test_verify_defaults_to_the_out_dir_variable(out_dir):
    assert await moore.main(["verify", "--seeds", "1"]) == EXIT_OK
    assert (out_dir / "verify" / "bound_reports.csv").exists()


@pytest.mark.asyncio
async def test_verify_violation_exit_status(monkeypatch, tmp_path):
    reports = [BoundReport("theorem1", 2.0, 1.0, 0, h=0, witness="s=1")]
    fake = AsyncMock(return_value=(summarize(reports), reports))
    monkeypatch.setattr("commands.verify.verify_all_async", fake)
    status = await moore.main(["verify", "--seeds", "1", "--out", str(tmp_path / "v.csv")])
    assert status == EXIT_VIOLATION
    fake.assert_awaited_once()


@pytest.mark.asyncio
async def test_verify_rejects_bad_discount():
    assert await moore.main(["verify", "--seeds", "1", "--discount", "1.0"]) == EXIT_CONFIG


@pytest.mark.asyncio
async def test_gen_data_writes_a_dataset(tmp_path):
    path = tmp_path / "data" / "grid.txt"
    status = await moore.main([
        "gen-data", "--env", "gridworld:3:0.1:20", "--tier", "expert", "--n", "50", "--out", str(path),
    ])
    assert status == EXIT_OK
    dataset = load_dataset(path)
    assert len(dataset) == 50
    assert dataset.behavior_tag == "expert"
    assert dataset.env_id == "gridworld:3:0.1:20"


@pytest.mark.asyncio
async def test_bad_env_is_a_config_error():
    assert await moore.main(["gen-data", "--env", "maze:3"]) == EXIT_CONFIG


@pytest.mark.asyncio
async def test_train_writes_log_and_model(tiny_config, tmp_path):
    out = tmp_path / "train"
    status = await moore.main([
        "train", "--config", str(tiny_config), "--scheme", "uniform", "--dump-model", "--out", str(out),
    ])
    assert status == EXIT_OK
    log = MetricsLog.from_csv(out / "uniform_seed0.csv")
    assert len(log) == 2
    assert log.header["train.epochs"] == "2"
    assert (out / "model_seed0.txt").exists()


@pytest.mark.asyncio
async def test_train_cli_flags_override_the_file(tiny_config, tmp_path):
    out = tmp_path / "train"
    status = await moore.main(["train", "--config", str(tiny_config), "--epochs", "1", "--out", str(out)])
    assert status == EXIT_OK
    assert len(MetricsLog.from_csv(out / "prioritized_seed0.csv")) == 1


@pytest.mark.asyncio
async def test_ablate_schemes_report(tiny_config, tmp_path):
    out = tmp_path / "ablate"
    status = await moore.main([
        "ablate", "schemes", "--config", str(tiny_config), "--seeds", "0", "--out", str(out),
    ])
    assert status == EXIT_OK
    curves = pd.read_csv(out / "learning_curves.csv")
    assert list(curves.columns) == ["epoch", "prioritized", "uniform", "half_half", "pure_online"]


@pytest.mark.asyncio
async def test_ablate_alpha_labels(tiny_config, tmp_path):
    out = tmp_path / "sweep"
    status = await moore.main([
        "ablate", "alpha", "--config", str(tiny_config), "--seeds", "0", "--alphas", "0.5,2",
        "--out", str(out),
    ])
    assert status == EXIT_OK
    comparison = pd.read_csv(out / "comparison.csv")
    assert list(comparison["label"]) == ["alpha=0.5", "alpha=2.0"]


@pytest.mark.asyncio
async def test_report_rebuilds_tables(synthetic_runs, tmp_path):
    runs = synthetic_runs
    out = tmp_path / "rebuilt"
    assert await moore.main(["report", str(runs), "--out", str(out)]) == EXIT_OK
    assert (out / "summary.csv").read_bytes() == (runs / "summary.csv").read_bytes()


@pytest.mark.asyncio
async def test_report_check_fails_without_uncertainty_decay(synthetic_runs):
    assert await moore.main(["report", str(synthetic_runs), "--check"]) == EXIT_ACCEPTANCE


@pytest.mark.asyncio
async def test_report_on_missing_runs(tmp_path):
    assert await moore.main(["report", str(tmp_path / "nothing")]) == EXIT_CONFIG


class DummyArgs:
    """Mocks parsed CLI flags; unset flags are None like argparse leaves them."""

    def __init__(self, **flags) -> None:
        """
        Initializes the DummyArgs instance.

        Args:
            **flags: Flag values keyed by their argparse dest.
        """
        self.env = None
        self.tier = None
        self.dataset = None
        self.dataset_size = None
        self.epochs = None
        self.alpha = None
        self.penalty = None
        self.out = None
        self.__dict__.update(flags)


def test_run_overrides_maps_flags_to_sections(tmp_path):
    overrides = run_overrides(DummyArgs(env="chain:6:0.2:30", epochs=3, out=tmp_path), seeds=(1,))
    assert overrides["env"] == {"family": "chain", "size": 6, "slip": 0.2, "horizon": 30}
    assert overrides["train"] == {"epochs": 3, "alpha": None, "penalty": None}
    assert overrides["run"] == {"seeds": (1,), "out_dir": tmp_path}
    assert run_overrides(DummyArgs())["env"] == {}


def test_out_root(out_dir, tmp_path):
    assert out_root(None, "train") == out_dir / "train"
    assert (out_dir / "train").is_dir()
    blocker = tmp_path / "file"
    blocker.write_text("")
    with pytest.raises(ConfigError):
        out_root(blocker / "child", "train")
