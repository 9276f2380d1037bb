"""Unit tests for the numerical bound checks."""

import numpy as np
import pandas as pd
import pytest

from conftest import make_random_mdp
from lab.errors import ConfigError
from lab.mdp_core import FiniteMdp, Policy, expected_return
from lab.theory_verify import (
    FAMILIES,
    INFORMATIONAL,
    BoundReport,
    MdpPair,
    VerifyConfig,
    check_g_inequality,
    check_lemma1_bound,
    check_lemma1_identity,
    check_return_gap,
    check_telescoping,
    check_theorem1,
    check_theorem2,
    check_tv_l1_identity,
    ensemble_uncertainty,
    random_mdp_pair,
    summarize,
    verify_all,
    verify_all_async,
    verify_seed,
    write_reports,
)

PAIR_FAMILIES = ("theorem1", "return_gap", "lemma1_bound", "telescoping", "g_inequality")


def stochastic_policy(seed: int, num_states: int, num_actions: int) -> Policy:
    rng = np.random.default_rng(seed)
    return Policy(rng.dirichlet(np.ones(num_actions), size=num_states))


def test_report_pass_rules():
    assert BoundReport("theorem1", 1.0, 1.0 - 1e-10, 0).passed
    assert not BoundReport("theorem1", 1.0, 0.99, 0).passed
    assert BoundReport("telescoping", 0.5, 0.5 + 1e-9, 0, kind="identity").passed
    assert not BoundReport("telescoping", 0.5, 0.5 + 1e-6, 0, kind="identity").passed
    shifted = BoundReport("theorem2_reward_shift", 2.0, 1.0, 0, asserted=False)
    assert not shifted.passed and not shifted.violation
    assert BoundReport("return_gap", 0.25, 1.0, 0).slack == 0.75


def test_pair_with_zero_eps_is_identical():
    pair = random_mdp_pair(3, 4, 2, 0.0)
    np.testing.assert_array_equal(pair.m1.transition, pair.m2.transition)
    assert pair.perturbation_size == 0.0


@pytest.mark.parametrize("eps", [0.05, 0.5, 2.0])
def test_pair_perturbation_is_bounded(eps):
    for seed in range(20):
        pair = random_mdp_pair(seed, 2 + seed % 5, 3, eps)
        assert pair.perturbation_size <= eps + 1e-9
        np.testing.assert_array_equal(pair.m1.reward, pair.m2.reward)


def test_pair_is_seeded():
    first, second = random_mdp_pair(8, 5, 3, 0.2), random_mdp_pair(8, 5, 3, 0.2)
    np.testing.assert_array_equal(first.m2.transition, second.m2.transition)
    np.testing.assert_array_equal(first.m1.initial_dist, second.m1.initial_dist)


def test_pair_rejects_bad_eps():
    with pytest.raises(ValueError):
        random_mdp_pair(0, 3, 2, 2.5)
    with pytest.raises(ValueError):
        random_mdp_pair(0, 3, 2, -0.1)


def test_theorem1_identical_pair_is_tight():
    reports = check_theorem1(random_mdp_pair(1, 5, 3, 0.0), 6)
    assert len(reports) == 7
    assert all(r.lhs == 0.0 and r.rhs == 0.0 and r.passed for r in reports)


def test_theorem1_holds_on_random_pairs():
    for seed in range(40):
        pair = random_mdp_pair(seed, 1 + seed % 8, 1 + seed % 4, (0.05, 0.2, 0.5, 2.0)[seed % 4])
        reports = check_theorem1(pair, 1 + seed % 10, seed)
        assert reports[-1].lhs == 0.0
        assert all(r.passed for r in reports)


def test_theorem1_needs_shared_rewards():
    pair = random_mdp_pair(0, 3, 2, 0.2)
    other = pair.m2.with_reward(np.zeros((3, 2)))
    with pytest.raises(ValueError):
        check_theorem1(MdpPair(pair.m1, other, False, 0.2), 4)


def test_return_gap():
    pair = random_mdp_pair(2, 4, 2, 0.0)
    assert check_return_gap(pair, 5).lhs == 0.0
    zero = random_mdp_pair(2, 4, 2, 0.5, reward_range=(0.0, 0.0))
    report = check_return_gap(zero, 5)
    assert (report.lhs, report.rhs) == (0.0, 0.0)
    assert report.passed
    for seed in range(30):
        assert check_return_gap(random_mdp_pair(seed, 5, 3, 0.5), 8, seed).passed


def test_lemma1_identity_examples():
    m_hat = make_random_mdp(4)
    pi = stochastic_policy(0, 5, 3)
    u = np.random.default_rng(1).uniform(0, 0.5, size=(5, 3))
    plain = check_lemma1_identity(m_hat, u, 0.0, pi)
    assert plain.lhs == pytest.approx(expected_return(m_hat, pi), abs=1e-12)
    constant = check_lemma1_identity(m_hat, np.full((5, 3), 0.3), 2.0, pi)
    assert constant.rhs == pytest.approx(expected_return(m_hat, pi) - 2.0 * 0.3 / 0.1)
    assert constant.passed
    assert check_lemma1_identity(m_hat, u, 1.5, pi, horizon=7).passed
    with pytest.raises(ValueError):
        check_lemma1_identity(m_hat, u, -1.0, pi)


def test_lemma1_bound_examples():
    pair = random_mdp_pair(5, 4, 3, 0.2)
    u = np.random.default_rng(2).uniform(0, 0.5, size=(4, 3))
    same = check_lemma1_bound(pair.m1, pair.m1, u, u, 1.0, 6)
    assert same.lhs == 0.0 and same.passed
    degenerate = check_lemma1_bound(pair.m1, pair.m1, u, u, 0.0, 6)
    assert (degenerate.lhs, degenerate.rhs) == (0.0, 0.0)
    report = check_lemma1_bound(pair.m1, pair.m2, u, u, 1.0, 6)
    assert report.check == "lemma1_bound" and report.passed
    assert dict(report.terms)["uncertainty"] >= 0.0
    shifted = check_lemma1_bound(pair.m1, pair.m2, u, u[::-1], 1.0, 6)
    assert shifted.check == "lemma1_bound_reward_shift"
    assert not shifted.asserted


def test_deterministic_rows_give_zero_fitted_uncertainty():
    successors = np.array([[1, 2], [2, 0], [0, 1]])
    mdp = FiniteMdp(np.eye(3)[successors], np.zeros((3, 2)), np.full(3, 1 / 3), 0.9)
    u = ensemble_uncertainty(mdp, np.random.default_rng(0), samples=15)
    assert np.all(u.values == 0.0)


def test_fitted_uncertainty_shrinks_with_samples():
    mdp = make_random_mdp(3, 4, 2)
    few = ensemble_uncertainty(mdp, np.random.default_rng(1), samples=10).values
    many = ensemble_uncertainty(mdp, np.random.default_rng(1), samples=400).values
    assert np.all((few >= 0.0) & (few <= 2.0))
    assert many.mean() < few.mean()


def test_lemma1_bound_holds_with_fitted_uncertainty():
    for seed in range(40):
        pair = random_mdp_pair(seed, 4, 3, 0.2)
        rng = np.random.default_rng(seed)
        u_t = ensemble_uncertainty(pair.m1, rng, samples=20)
        u_t1 = ensemble_uncertainty(pair.m2, rng, samples=20)
        report = check_lemma1_bound(pair.m1, pair.m2, u_t, u_t, 1.0, 6, seed)
        assert report.check == "lemma1_bound" and report.passed, seed
        shifted = check_lemma1_bound(pair.m1, pair.m2, u_t, u_t1, 1.0, 6, seed)
        assert shifted.check == "lemma1_bound_reward_shift"


def test_telescoping_examples():
    pair = random_mdp_pair(6, 5, 2, 0.5)
    pi = stochastic_policy(3, 5, 2)
    same = check_telescoping(pair.m1, pair.m1, pi)
    assert same.lhs == 0.0 and same.rhs == 0.0
    assert check_telescoping(pair.m1, pair.m2, pi).passed
    low = random_mdp_pair(6, 5, 2, 0.5, discount=0.01)
    assert check_telescoping(low.m1, low.m2, pi).passed
    with pytest.raises(ValueError):
        check_telescoping(pair.m1, pair.m2.with_reward(np.zeros((5, 2))), pi)


def test_g_inequality_examples():
    pair = random_mdp_pair(7, 4, 3, 0.5, reward_range=(0.0, 1.0))
    pi = stochastic_policy(4, 4, 3)
    assert all(r.lhs == 0.0 for r in check_g_inequality(pair.m1, pair.m1, pi))
    reports = check_g_inequality(pair.m1, pair.m2, pi)
    assert len(reports) == 12
    assert all(r.passed for r in reports)
    flat = pair.m1.with_reward(np.full((4, 3), 0.4))
    constant = check_g_inequality(flat, pair.m2.with_reward(np.full((4, 3), 0.4)), pi)
    assert all(r.lhs <= 1e-12 for r in constant)


def test_theorem2_examples():
    pair = random_mdp_pair(9, 4, 2, 0.2, reward_range=(0.0, 1.0))
    u = np.random.default_rng(5).uniform(0, 0.5, size=(4, 2))
    same = check_theorem2(pair.m1, pair.m2, pair.m2, u, u, 1.0, 5)
    assert same.lhs == 0.0 and same.passed
    zero_u = np.zeros((4, 2))
    perfect = check_theorem2(pair.m1, pair.m1, pair.m1, zero_u, zero_u, 1.0, 5)
    assert (perfect.lhs, perfect.rhs) == (0.0, 0.0)
    report = check_theorem2(pair.m1, pair.m1, pair.m2, u, u, 1.0, 5)
    assert [name for name, _ in report.terms] == [
        "dynamics", "model_error_t", "model_error_t1", "uncertainty"
    ]
    assert report.rhs == pytest.approx(sum(value for _, value in report.terms))
    assert report.passed


def test_tv_matches_half_l1():
    report = check_tv_l1_identity(np.random.default_rng(0), 20, 8)
    assert report.kind == "identity" and report.passed


@pytest.mark.parametrize("changes", [
    {"seeds": 0}, {"max_states": 0}, {"eps_grid": ()}, {"eps_grid": (3.0,)},
    {"penalty": -1.0}, {"discount": 1.0}, {"tv_pairs": 0}, {"ensemble_size": 1},
])
def test_verify_config_validation(changes):
    with pytest.raises(ConfigError):
        VerifyConfig(**changes)


def test_single_seed_reports_every_family():
    reports = verify_seed(0, VerifyConfig(seeds=1))
    summary = summarize(reports)
    assert tuple(summary.counts) == FAMILIES
    for family, count in summary.counts.items():
        if family not in ("theorem1", "g_inequality"):
            assert count == 1


def test_zero_eps_grid_gives_zero_gaps():
    summary, reports = verify_all(VerifyConfig(seeds=12, eps_grid=(0.0,)))
    assert summary.ok
    assert all(r.lhs == 0.0 for r in reports if r.check in PAIR_FAMILIES)


def test_verify_all_has_no_violations():
    summary, reports = verify_all(VerifyConfig(seeds=400))
    assert summary.ok, summary.witnesses[:3]
    assert summary.total == len(reports) >= 4000
    frame = summary.to_frame()
    assert frame.loc[frame["check"].isin(INFORMATIONAL), "violations"].sum() == 0


@pytest.mark.asyncio
async def test_verify_all_async_orders_reports():
    summary, reports = await verify_all_async(VerifyConfig(seeds=5, first_seed=10))
    assert summary.ok
    keys = [(FAMILIES.index(r.check), r.seed) for r in reports]
    assert keys == sorted(keys)
    assert {r.seed for r in reports} == set(range(10, 15))


def test_write_reports(tmp_path):
    reports = verify_seed(1, VerifyConfig(seeds=1))
    path = tmp_path / "verify.csv"
    write_reports(reports, path)
    frame = pd.read_csv(path)
    assert list(frame.columns) == ["check", "seed", "h", "lhs", "rhs", "slack", "passed"]
    assert len(frame) == len(reports)
