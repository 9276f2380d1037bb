"""Tabular ensemble dynamics models and ensemble-disagreement uncertainty.

Each of the K members is a Dirichlet-smoothed count model fit on its own
resample of the data. Uncertainty u(s,a) is the largest pairwise l1
disagreement between member next-state rows plus the largest pairwise
reward disagreement. Pairs never seen in the data get the cap u_max.
"""

import logging
from dataclasses import dataclass
from itertools import combinations
from pathlib import Path
from typing import Callable, Optional, Sequence, Tuple, Union

import numpy as np

from lab.envs import Transition
from lab.errors import EmptyDatasetError
from lab.mdp_core import FiniteMdp, Policy, format_mdp, occupancy_measure, sample_rows

logger = logging.getLogger(__name__)

DEFAULT_SMOOTHING = 0.1
DEFAULT_ENSEMBLE_SIZE = 5

Resampler = Callable[[np.random.Generator], np.ndarray]


@dataclass(frozen=True, eq=False)
class EnsembleModel:
    """K tabular estimators of p(s'|s,a) and r(s,a).

    Attributes:
        transition (np.ndarray): member rows, shape (K, S, A, S).
        reward (np.ndarray): member mean rewards, shape (K, S, A).
        visit_counts (np.ndarray): n(s,a) in the fitted data, shape (S, A).
        terminal (np.ndarray): states seen as terminal successors.
        smoothing (float): Dirichlet pseudo-count per next-state cell.
    """

    transition: np.ndarray
    reward: np.ndarray
    visit_counts: np.ndarray
    terminal: np.ndarray
    smoothing: float = DEFAULT_SMOOTHING

    def __post_init__(self) -> None:
        if self.transition.ndim != 4 or self.transition.shape[0] < 2:
            raise ValueError("an ensemble needs at least two members of shape (S, A, S)")
        if self.reward.shape != self.transition.shape[:3]:
            raise ValueError("member reward tables must have shape (K, S, A)")

    @property
    def size(self) -> int:
        return self.transition.shape[0]

    @property
    def num_states(self) -> int:
        return self.transition.shape[1]

    @property
    def num_actions(self) -> int:
        return self.transition.shape[2]

    @property
    def mean_transition(self) -> np.ndarray:
        return self.transition.mean(axis=0)

    @property
    def mean_reward(self) -> np.ndarray:
        return self.reward.mean(axis=0)

    def as_mdp(
        self,
        initial_dist: np.ndarray,
        discount: float,
        reward: Optional[np.ndarray] = None,
        horizon: Optional[int] = None,
    ) -> FiniteMdp:
        """Member-average model as an exact MDP, optionally with another reward."""
        return FiniteMdp(
            self.mean_transition,
            self.mean_reward if reward is None else reward,
            initial_dist,
            discount,
            horizon=horizon,
            terminal=self.terminal,
        )

    def member_mdp(self, k: int, initial_dist: np.ndarray, discount: float) -> FiniteMdp:
        return FiniteMdp(
            self.transition[k], self.reward[k], initial_dist, discount, terminal=self.terminal
        )


@dataclass(frozen=True, eq=False)
class UncertaintyTable:
    """u(s,a) >= 0 with the cap applied at never-visited pairs."""

    values: np.ndarray
    u_max: float

    def __post_init__(self) -> None:
        if np.any(self.values < 0):
            raise ValueError("uncertainty must be nonnegative")

    def mean_over(self, pairs: Sequence[Tuple[int, int]]) -> float:
        """Mean u over a set of (s,a) pairs, NaN when the set is empty."""
        if not pairs:
            return float("nan")
        states, actions = np.asarray(list(pairs)).T
        return float(self.values[states, actions].mean())


def _as_arrays(transitions: Sequence[Transition]):
    states = np.fromiter((t.state for t in transitions), dtype=int, count=len(transitions))
    actions = np.fromiter((t.action for t in transitions), dtype=int, count=len(transitions))
    rewards = np.fromiter((t.reward for t in transitions), dtype=float, count=len(transitions))
    next_states = np.fromiter(
        (t.next_state for t in transitions), dtype=int, count=len(transitions)
    )
    done = np.fromiter((t.done for t in transitions), dtype=bool, count=len(transitions))
    return states, actions, rewards, next_states, done


def fit_ensemble(
    data: Sequence[Transition],
    num_states: int,
    num_actions: int,
    ensemble_size: int = DEFAULT_ENSEMBLE_SIZE,
    smoothing: float = DEFAULT_SMOOTHING,
    seed: int = 0,
    priorities: Optional[np.ndarray] = None,
    bootstrap: bool = True,
    resampler: Optional[Resampler] = None,
) -> EnsembleModel:
    """Fits K smoothed count models, each on its own resample of ``data``.

    Args:
        data (Sequence[Transition]): Transitions, e.g. D_off or D_off plus D_on.
        num_states (int): Size of the state space.
        num_actions (int): Size of the action space.
        ensemble_size (int): K >= 2.
        smoothing (float): Dirichlet pseudo-count eps_d > 0.
        seed (int): Seed of the resampling stream.
        priorities (Optional[np.ndarray]): Per-transition sampling weights for
            the bootstrap; uniform if None.
        bootstrap (bool): If False every member fits the full data once.
        resampler (Optional[Resampler]): Custom draw of member resample
            indices; overrides ``priorities`` and ``bootstrap``.

    Returns:
        EnsembleModel: The fitted ensemble.
    """
    transitions = tuple(data)
    if not transitions:
        raise EmptyDatasetError("cannot fit a model on an empty dataset")
    if ensemble_size < 2:
        raise ValueError(f"ensemble size must be at least 2, got {ensemble_size}")
    if smoothing <= 0:
        raise ValueError(f"smoothing must be positive, got {smoothing}")
    states, actions, rewards, next_states, done = _as_arrays(transitions)
    size = len(transitions)
    probs = None
    if priorities is not None:
        weights = np.asarray(priorities, dtype=float)
        if weights.shape != (size,) or np.any(weights < 0) or weights.sum() <= 0:
            raise ValueError("priorities must be nonnegative weights, one per transition")
        probs = weights / weights.sum()
    rng = np.random.default_rng(seed)

    transition = np.zeros((ensemble_size, num_states, num_actions, num_states))
    reward = np.zeros((ensemble_size, num_states, num_actions))
    for k in range(ensemble_size):
        if resampler is not None:
            index = resampler(rng)
        elif bootstrap:
            index = rng.choice(size, size=size, replace=True, p=probs)
        else:
            index = np.arange(size)
        counts = np.zeros((num_states, num_actions, num_states))
        reward_sums = np.zeros((num_states, num_actions))
        np.add.at(counts, (states[index], actions[index], next_states[index]), 1.0)
        np.add.at(reward_sums, (states[index], actions[index]), rewards[index])
        visits = counts.sum(axis=2)
        transition[k] = (counts + smoothing) / (visits[..., None] + smoothing * num_states)
        reward[k] = np.divide(
            reward_sums, visits, out=np.zeros_like(reward_sums), where=visits > 0
        )

    terminal = np.zeros(num_states, dtype=bool)
    terminal[next_states[done]] = True
    transition[:, terminal] = 0.0
    for state in np.flatnonzero(terminal):
        transition[:, state, :, state] = 1.0
    reward[:, terminal] = 0.0

    visit_counts = np.zeros((num_states, num_actions))
    np.add.at(visit_counts, (states, actions), 1.0)
    logger.debug(
        "Fit %d-member ensemble on %d transitions (%d visited pairs)",
        ensemble_size, size, int((visit_counts > 0).sum()),
    )
    return EnsembleModel(transition, reward, visit_counts, terminal, smoothing)


def uncertainty(model: EnsembleModel, r_max: Optional[float] = None) -> UncertaintyTable:
    """Ensemble-disagreement uncertainty, capped at u_max = 2 + 2*r_max.

    Args:
        model (EnsembleModel): Fitted ensemble.
        r_max (Optional[float]): Reward bound for the cap; defaults to the
            largest absolute member reward.

    Returns:
        UncertaintyTable: u(s,a).
    """
    dynamics = np.zeros((model.num_states, model.num_actions))
    for i, j in combinations(range(model.size), 2):
        gap = np.abs(model.transition[i] - model.transition[j]).sum(axis=2)
        dynamics = np.maximum(dynamics, gap)
    rewards = model.reward.max(axis=0) - model.reward.min(axis=0)
    if r_max is None:
        r_max = float(np.max(np.abs(model.reward)))
    u_max = 2.0 + 2.0 * r_max
    values = np.minimum(dynamics + rewards, u_max)
    unvisited = (model.visit_counts == 0) & ~model.terminal[:, None]
    values[unvisited] = u_max
    return UncertaintyTable(values, u_max)


def _table(u: Union[UncertaintyTable, np.ndarray]) -> np.ndarray:
    return u.values if isinstance(u, UncertaintyTable) else np.asarray(u, dtype=float)


def penalized_reward(
    model: EnsembleModel, u: Union[UncertaintyTable, np.ndarray], lam: float
) -> np.ndarray:
    """r~(s,a) = mean_k r^_k(s,a) - lam * u(s,a)."""
    if lam < 0:
        raise ValueError(f"penalty coefficient must be nonnegative, got {lam}")
    return model.mean_reward - lam * _table(u)


def sample_steps(
    model: EnsembleModel,
    states: np.ndarray,
    actions: np.ndarray,
    rng: np.random.Generator,
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Vectorized model step: a uniform member per row, then s' from its row.

    Returns:
        Tuple[np.ndarray, np.ndarray, np.ndarray]: next states, member
        rewards and the member index used for each row.
    """
    members = rng.integers(model.size, size=len(states))
    next_states = sample_rows(model.transition[members, states, actions], rng)
    return next_states, model.reward[members, states, actions], members


def sample_step(
    model: EnsembleModel, state: int, action: int, rng: np.random.Generator
) -> Tuple[int, float]:
    next_states, rewards, _ = sample_steps(
        model, np.array([state]), np.array([action]), rng
    )
    return int(next_states[0]), float(rewards[0])


def policy_uncertainty(
    mdp_hat: FiniteMdp,
    u: Union[UncertaintyTable, np.ndarray],
    pi: Policy,
    horizon: Optional[int] = None,
) -> float:
    """U(pi) = sum_{s,a} rho^pi(s,a) u(s,a) under the unnormalized occupancy."""
    return occupancy_measure(mdp_hat, pi, horizon).expectation(_table(u))


def format_model(
    model: EnsembleModel, u: UncertaintyTable, initial_dist: np.ndarray, discount: float
) -> str:
    """Diagnostic dump: one mdp text block per member, then the u table."""
    blocks = []
    for k in range(model.size):
        blocks.append(f"# member {k}\n" + format_mdp(model.member_mdp(k, initial_dist, discount)))
    rows = [f"u {model.num_states} {model.num_actions} {u.u_max!r}"]
    rows.extend(" ".join(repr(float(x)) for x in row) for row in u.values)
    blocks.append("\n".join(rows) + "\n")
    return "".join(blocks)


def dump_model(
    model: EnsembleModel,
    u: UncertaintyTable,
    path: Union[str, Path],
    initial_dist: np.ndarray,
    discount: float,
) -> None:
    Path(path).write_text(format_model(model, u, initial_dist, discount))
    logger.info("Dumped %d-member model to %s", model.size, path)
