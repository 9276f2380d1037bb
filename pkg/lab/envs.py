"""Desk-scale environments and offline dataset generation.

Two families are available, a slippery gridworld and a slippery chain. Both
pay -0.01 per step and +1 on entering the absorbing goal. ``build_env``
returns the exact MDP together with a seeded sampling stepper.
"""

import logging
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Iterable, Optional, Sequence, Tuple, Union

import numpy as np

from lab.errors import ConfigError, EmptyDatasetError
from lab.mdp_core import FiniteMdp, Policy, sample_index, value_iteration_discounted

logger = logging.getLogger(__name__)

STEP_REWARD = -0.01
GOAL_REWARD = 1.0
MEDIUM_EPSILON = 0.4


class Origin(str, Enum):
    OFFLINE = "offline"
    ONLINE = "online"
    MODEL = "model"


class BehaviorTier(str, Enum):
    RANDOM = "random"
    MEDIUM = "medium"
    MEDIUM_REPLAY = "medium_replay"
    EXPERT = "expert"


@dataclass(frozen=True)
class Transition:
    """One environment step (s, a, r, s') with its provenance.

    ``done`` marks arrival in a terminal state; time-limit truncation is not
    a terminal event and shows up only as ``step_index`` restarting at 0.
    """

    state: int
    action: int
    reward: float
    next_state: int
    done: bool
    origin: Origin
    step_index: int = 0


@dataclass(frozen=True)
class Dataset:
    """A fixed batch of transitions, e.g. D_off."""

    transitions: Tuple[Transition, ...]
    env_id: str
    behavior_tag: str
    seed: int

    def __post_init__(self) -> None:
        if not self.transitions:
            raise EmptyDatasetError("a dataset needs at least one transition")
        object.__setattr__(self, "transitions", tuple(self.transitions))

    def __len__(self) -> int:
        return len(self.transitions)

    def __iter__(self):
        return iter(self.transitions)


@dataclass(frozen=True)
class EnvSpec:
    """Parameters of a desk-scale environment.

    Attributes:
        family (str): "gridworld" or "chain".
        size (int): Grid side length or chain length.
        slip (float): Probability in [0, 1) that the move direction is drawn
            uniformly from all actions instead of the chosen one.
        horizon (int): Episode time limit.
        discount (float): gamma of the exact MDP.
    """

    family: str = "gridworld"
    size: int = 5
    slip: float = 0.0
    horizon: int = 50
    discount: float = 0.95

    def __post_init__(self) -> None:
        if self.family not in ("gridworld", "chain"):
            raise ConfigError(f"unknown environment family {self.family!r}")
        if self.size < 2:
            raise ConfigError(f"environment size must be at least 2, got {self.size}")
        if not 0.0 <= self.slip < 1.0:
            raise ConfigError(f"slip must lie in [0, 1), got {self.slip}")
        if self.horizon < 1:
            raise ConfigError(f"horizon must be at least 1, got {self.horizon}")
        if not 0.0 < self.discount < 1.0:
            raise ConfigError(f"discount must lie in (0, 1), got {self.discount}")

    @property
    def env_id(self) -> str:
        return f"{self.family}:{self.size}:{self.slip!r}:{self.horizon}"

    @classmethod
    def parse(cls, env_id: str) -> "EnvSpec":
        """Parses ``family[:size[:slip[:horizon]]]``."""
        parts = env_id.split(":")
        try:
            kwargs = {"family": parts[0]}
            if len(parts) > 1:
                kwargs["size"] = int(parts[1])
            if len(parts) > 2:
                kwargs["slip"] = float(parts[2])
            if len(parts) > 3:
                kwargs["horizon"] = int(parts[3])
        except ValueError as e:
            raise ConfigError(f"malformed environment id {env_id!r}: {e}") from e
        if len(parts) > 4:
            raise ConfigError(f"malformed environment id {env_id!r}")
        return cls(**kwargs)


class Stepper:
    """Samples trajectories from an exact MDP with its own RNG stream."""

    def __init__(self, mdp: FiniteMdp, horizon: int, seed: Optional[int] = None) -> None:
        """Initializes the stepper.

        Args:
            mdp (FiniteMdp): Ground-truth dynamics.
            horizon (int): Episode time limit.
            seed (Optional[int]): Seed for the sampling stream.
        """
        self.mdp = mdp
        self.horizon = horizon
        self.rng = np.random.default_rng(seed)
        self.state: Optional[int] = None
        self.elapsed = 0

    def reset(self, seed: Optional[int] = None, state: Optional[int] = None) -> int:
        """Starts an episode from mu0, or from ``state`` if given."""
        if seed is not None:
            self.rng = np.random.default_rng(seed)
        if state is None:
            state = sample_index(self.mdp.initial_dist, self.rng)
        self.state = int(state)
        self.elapsed = 0
        return self.state

    def step(self, action: int) -> Tuple[int, float, bool, bool]:
        """Advances one step.

        Returns:
            Tuple[int, float, bool, bool]: next state, reward, terminated, truncated.
        """
        if self.state is None:
            raise RuntimeError("call reset() before step()")
        reward = float(self.mdp.reward[self.state, action])
        next_state = sample_index(self.mdp.transition[self.state, action], self.rng)
        self.elapsed += 1
        terminated = bool(self.mdp.terminal[next_state])
        truncated = not terminated and self.elapsed >= self.horizon
        self.state = next_state
        return next_state, reward, terminated, truncated


def _move_table(spec: EnvSpec) -> Tuple[np.ndarray, int, int]:
    """Deterministic successor of every (cell, direction), plus start and goal."""
    if spec.family == "gridworld":
        side = spec.size
        offsets = [(-1, 0), (0, 1), (1, 0), (0, -1)]
        moves = np.zeros((side * side, len(offsets)), dtype=int)
        for cell in range(side * side):
            row, col = divmod(cell, side)
            for direction, (d_row, d_col) in enumerate(offsets):
                n_row, n_col = row + d_row, col + d_col
                inside = 0 <= n_row < side and 0 <= n_col < side
                moves[cell, direction] = n_row * side + n_col if inside else cell
        return moves, 0, side * side - 1
    length = spec.size
    moves = np.zeros((length, 2), dtype=int)
    for cell in range(length):
        moves[cell, 0] = max(cell - 1, 0)
        moves[cell, 1] = min(cell + 1, length - 1)
    return moves, 0, length - 1


def build_env(spec: EnvSpec, seed: Optional[int] = None) -> Tuple[FiniteMdp, Stepper]:
    """Builds the exact MDP for ``spec`` and a stepper sampling from it.

    Args:
        spec (EnvSpec): Environment parameters.
        seed (Optional[int]): Seed of the stepper's sampling stream.

    Returns:
        Tuple[FiniteMdp, Stepper]: Ground truth and sampler.
    """
    moves, start, goal = _move_table(spec)
    num_states, num_actions = moves.shape
    transition = np.zeros((num_states, num_actions, num_states))
    for state in range(num_states):
        for action in range(num_actions):
            transition[state, action, moves[state, action]] += 1.0 - spec.slip
            for direction in range(num_actions):
                transition[state, action, moves[state, direction]] += spec.slip / num_actions
    transition[goal] = 0.0
    transition[goal, :, goal] = 1.0
    reward = STEP_REWARD + GOAL_REWARD * transition[:, :, goal]
    reward[goal] = 0.0
    terminal = np.zeros(num_states, dtype=bool)
    terminal[goal] = True
    initial_dist = np.zeros(num_states)
    initial_dist[start] = 1.0
    mdp = FiniteMdp(transition, reward, initial_dist, spec.discount, terminal=terminal)
    logger.debug("Built %s with %d states and %d actions", spec.env_id, num_states, num_actions)
    return mdp, Stepper(mdp, spec.horizon, seed)


@dataclass(frozen=True)
class EpisodeMixture:
    """A behavior that commits to one component policy per episode."""

    components: Tuple[Policy, ...]
    weights: Tuple[float, ...]

    def draw(self, rng: np.random.Generator) -> Policy:
        return self.components[sample_index(np.asarray(self.weights), rng)]


Behavior = Union[Policy, EpisodeMixture]


def epsilon_greedy(greedy: Policy, epsilon: float) -> Policy:
    uniform = np.full(greedy.table.shape, 1.0 / greedy.num_actions)
    return Policy((1.0 - epsilon) * greedy.table + epsilon * uniform)


def make_behavior_policy(
    env: FiniteMdp, tier: Union[BehaviorTier, str], seed: Optional[int] = None
) -> Behavior:
    """Builds the data-collection behavior for a quality tier.

    random is uniform, expert is the greedy optimal policy, medium is
    epsilon-greedy around it with epsilon = 0.4, and medium_replay mixes
    random and medium per episode.

    Args:
        env (FiniteMdp): Environment the behavior acts in.
        tier (Union[BehaviorTier, str]): Quality tier.
        seed (Optional[int]): Ignored. Every tier is a deterministic function
            of ``env``; :func:`generate_offline_dataset` draws the actions.

    Returns:
        Behavior: A policy, or an episode mixture for medium_replay.
    """
    tier = BehaviorTier(tier)
    if tier is BehaviorTier.RANDOM:
        return Policy.uniform(env.num_states, env.num_actions)
    _, expert = value_iteration_discounted(env)
    if tier is BehaviorTier.EXPERT:
        return expert
    medium = epsilon_greedy(expert, MEDIUM_EPSILON)
    if tier is BehaviorTier.MEDIUM:
        return medium
    random_policy = Policy.uniform(env.num_states, env.num_actions)
    return EpisodeMixture((random_policy, medium), (0.5, 0.5))


def generate_offline_dataset(
    stepper: Stepper,
    behavior: Behavior,
    n: int,
    seed: int,
    tier: Union[BehaviorTier, str] = "custom",
    env_id: str = "",
) -> Dataset:
    """Rolls out ``behavior`` until exactly ``n`` transitions are collected.

    Args:
        stepper (Stepper): Environment sampler; it is reseeded from ``seed``.
        behavior (Behavior): A policy, or an episode mixture of policies.
        n (int): Number of transitions.
        seed (int): Seed for both the environment and the action stream.
        tier (Union[BehaviorTier, str]): Tag stored on the dataset.
        env_id (str): Identifier stored on the dataset.

    Returns:
        Dataset: D_off with origin ``offline`` on every transition.
    """
    if n < 1:
        raise ValueError(f"n must be at least 1, got {n}")
    env_stream, action_stream = np.random.SeedSequence(seed).spawn(2)
    action_rng = np.random.default_rng(action_stream)
    stepper.reset(seed=int(env_stream.generate_state(1)[0]))
    transitions = []
    policy = behavior.draw(action_rng) if isinstance(behavior, EpisodeMixture) else behavior
    state, step_index = stepper.state, 0
    while len(transitions) < n:
        action = sample_index(policy.at(0)[state], action_rng)
        next_state, reward, terminated, truncated = stepper.step(action)
        transitions.append(
            Transition(state, action, reward, next_state, terminated, Origin.OFFLINE, step_index)
        )
        step_index += 1
        state = next_state
        if terminated or truncated:
            state, step_index = stepper.reset(), 0
            if isinstance(behavior, EpisodeMixture):
                policy = behavior.draw(action_rng)
    tag = tier.value if isinstance(tier, BehaviorTier) else str(tier)
    logger.info("Generated %d offline transitions (%s) for %s", n, tag, env_id or "env")
    return Dataset(tuple(transitions), env_id, tag, seed)


def episode_returns(transitions: Iterable[Transition], discount: float) -> np.ndarray:
    """Discounted return of every complete episode in a transition stream."""
    returns, current, open_episode = [], 0.0, False
    for transition in transitions:
        if transition.step_index == 0 and open_episode:
            returns.append(current)
            current = 0.0
        current += discount ** transition.step_index * transition.reward
        open_episode = True
        if transition.done:
            returns.append(current)
            current, open_episode = 0.0, False
    return np.asarray(returns)


def format_transitions(
    transitions: Sequence[Transition], env_id: str, behavior: str, seed: int
) -> str:
    """Serializes transitions as ``dataset env_id behavior seed n`` plus one line each."""
    lines = [f"dataset {env_id or '-'} {behavior} {seed} {len(transitions)}"]
    for t in transitions:
        lines.append(
            f"{t.state} {t.action} {t.reward!r} {t.next_state} {int(t.done)} "
            f"{t.origin.value} {t.step_index}"
        )
    return "\n".join(lines) + "\n"


def save_dataset(dataset: Dataset, path: Union[str, Path]) -> None:
    Path(path).write_text(
        format_transitions(dataset.transitions, dataset.env_id, dataset.behavior_tag, dataset.seed)
    )
    logger.info("Wrote %d transitions to %s", len(dataset), path)


def load_dataset(path: Union[str, Path]) -> Dataset:
    """Reads a dataset written by :func:`save_dataset`."""
    lines = Path(path).read_text().splitlines()
    header = lines[0].split() if lines else []
    if len(header) != 5 or header[0] != "dataset":
        raise ValueError(f"{path}: expected 'dataset env_id behavior seed n' header")
    _, env_id, behavior, seed, count = header
    transitions = []
    for line in lines[1:]:
        if not line.strip():
            continue
        s, a, r, s2, done, origin, step = line.split()
        transitions.append(
            Transition(int(s), int(a), float(r), int(s2), done == "1", Origin(origin), int(step))
        )
    if len(transitions) != int(count):
        raise ValueError(f"{path}: header announces {count} transitions, found {len(transitions)}")
    return Dataset(tuple(transitions), "" if env_id == "-" else env_id, behavior, int(seed))
