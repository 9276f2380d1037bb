"""Two-stage offline-to-online training on tabular problems.

The offline stage fits an ensemble on D_off, penalizes its reward by the
ensemble uncertainty and learns Q from model rollouts. The online stage
keeps collecting real transitions into a prioritized buffer whose offline
priorities decay every epoch, refits the ensemble every ``phi`` steps on
the scheme-weighted data and keeps learning Q from fresh penalized rollouts.
"""

import logging
import math
import time
from dataclasses import dataclass
from enum import Enum
from typing import List, NamedTuple, Optional, Sequence, Tuple, Union

import numpy as np

from lab.envs import Dataset, Origin, Stepper, Transition
from lab.errors import ConfigError, EmptyDatasetError
from lab.mdp_core import (
    FiniteMdp,
    Policy,
    dynamics_distance,
    expected_return,
    occupancy_measure,
    row_l1_distances,
    sample_index,
    sample_rows,
    value_iteration_discounted,
)
from lab.metrics import EpochMetrics, MetricsLog
from lab.model_learn import (
    EnsembleModel,
    UncertaintyTable,
    fit_ensemble,
    penalized_reward,
    policy_uncertainty,
    sample_steps,
    uncertainty,
)
from lab.replay import PriorityBuffer, expected_offline_fraction

logger = logging.getLogger(__name__)


class Scheme(str, Enum):
    """How model-fit data and rollout starts are drawn from D_off and D_on."""

    PRIORITIZED = "prioritized"
    UNIFORM = "uniform"
    HALF_HALF = "half_half"
    PURE_ONLINE = "pure_online"


@dataclass(frozen=True)
class TrainConfig:
    """Hyper-parameters of both training stages.

    Defaults are desk-scale. Full-scale online runs use epochs=100,
    steps_per_epoch=1000, model_update_freq=250, rollout_batch=100000 and
    updates_per_step=20.
    """

    epochs: int = 30
    steps_per_epoch: int = 200
    model_update_freq: int = 50
    rollout_batch: int = 2000
    rollout_length: int = 5
    updates_per_step: int = 5
    penalty: float = 1.0
    alpha: float = 1.0
    ensemble_size: int = 5
    learning_rate: float = 0.5
    batch_size: int = 256
    model_capacity: int = 0
    smoothing: float = 0.1
    temperature: float = 0.1
    temperature_decay: float = 0.99
    offline_rounds: int = 200
    offline_tol: float = 1e-4
    eval_episodes: int = 0
    seed: int = 0

    def __post_init__(self) -> None:
        positive = (
            "epochs", "steps_per_epoch", "model_update_freq", "rollout_batch",
            "rollout_length", "updates_per_step", "alpha", "learning_rate",
            "batch_size", "smoothing", "temperature", "temperature_decay",
            "offline_rounds",
        )
        for name in positive:
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive, got {getattr(self, name)}")
        if self.ensemble_size < 2:
            raise ConfigError(f"ensemble_size must be at least 2, got {self.ensemble_size}")
        if self.model_update_freq > self.steps_per_epoch:
            raise ConfigError("model_update_freq must not exceed steps_per_epoch")
        if self.learning_rate > 1:
            raise ConfigError(f"learning_rate must lie in (0, 1], got {self.learning_rate}")
        if self.penalty < 0:
            raise ConfigError(f"penalty must be nonnegative, got {self.penalty}")
        if self.model_capacity < 0 or self.eval_episodes < 0 or self.offline_tol < 0:
            raise ConfigError("model_capacity, eval_episodes and offline_tol must be nonnegative")

    @property
    def model_buffer_capacity(self) -> int:
        """C_model; 0 in the config means 50 rollout batches."""
        return self.model_capacity or 50 * self.rollout_batch


@dataclass
class QTable:
    """Tabular action values with Boltzmann or greedy action selection."""

    q: np.ndarray
    learning_rate: float = 0.5
    temperature: Optional[float] = None

    def __post_init__(self) -> None:
        if not 0 < self.learning_rate <= 1:
            raise ValueError(f"learning_rate must lie in (0, 1], got {self.learning_rate}")
        self.q = np.array(self.q, dtype=float)

    @classmethod
    def zeros(cls, num_states: int, num_actions: int, **kwargs) -> "QTable":
        return cls(np.zeros((num_states, num_actions)), **kwargs)

    def copy(self) -> "QTable":
        return QTable(self.q.copy(), self.learning_rate, self.temperature)

    def greedy_policy(self) -> Policy:
        return Policy.deterministic(self.q.argmax(axis=1), self.q.shape[1])

    def action_probs(self, temperature: Optional[float] = None) -> np.ndarray:
        """Boltzmann probabilities per state; one-hot greedy rows without a temperature."""
        temperature = self.temperature if temperature is None else temperature
        if not temperature:
            return np.eye(self.q.shape[1])[self.q.argmax(axis=1)]
        logits = (self.q - self.q.max(axis=1, keepdims=True)) / temperature
        weights = np.exp(logits)
        return weights / weights.sum(axis=1, keepdims=True)

    def boltzmann_policy(self, temperature: Optional[float] = None) -> Policy:
        return Policy(self.action_probs(temperature))

    def act(self, state: int, rng: np.random.Generator, temperature: Optional[float] = None) -> int:
        temperature = self.temperature if temperature is None else temperature
        if not temperature:
            return int(self.q[state].argmax())
        logits = (self.q[state] - self.q[state].max()) / temperature
        weights = np.exp(logits)
        return sample_index(weights / weights.sum(), rng)


class TransitionBatch(NamedTuple):
    """Columnar transitions; the fast path between rollouts and Q updates."""

    states: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray
    next_states: np.ndarray
    done: np.ndarray
    step_index: np.ndarray

    def __len__(self) -> int:
        return len(self.states)

    @classmethod
    def from_transitions(cls, transitions: Sequence[Transition]) -> "TransitionBatch":
        count = len(transitions)
        return cls(
            np.fromiter((t.state for t in transitions), dtype=int, count=count),
            np.fromiter((t.action for t in transitions), dtype=int, count=count),
            np.fromiter((t.reward for t in transitions), dtype=float, count=count),
            np.fromiter((t.next_state for t in transitions), dtype=int, count=count),
            np.fromiter((t.done for t in transitions), dtype=bool, count=count),
            np.fromiter((t.step_index for t in transitions), dtype=int, count=count),
        )

    def to_transitions(self, origin: Origin = Origin.MODEL) -> List[Transition]:
        return [
            Transition(int(s), int(a), float(r), int(s2), bool(d), origin, int(i))
            for s, a, r, s2, d, i in zip(*self)
        ]


class ModelBuffer:
    """FIFO store for D_model with capacity C_model, kept as ring arrays."""

    def __init__(self, capacity: int) -> None:
        if capacity < 1:
            raise ValueError(f"capacity must be positive, got {capacity}")
        self.capacity = capacity
        self._columns = TransitionBatch(
            np.zeros(capacity, dtype=int),
            np.zeros(capacity, dtype=int),
            np.zeros(capacity),
            np.zeros(capacity, dtype=int),
            np.zeros(capacity, dtype=bool),
            np.zeros(capacity, dtype=int),
        )
        self._next = 0
        self._size = 0

    def __len__(self) -> int:
        return self._size

    def copy(self) -> "ModelBuffer":
        clone = ModelBuffer(self.capacity)
        for target, source in zip(clone._columns, self._columns):
            target[:] = source
        clone._next, clone._size = self._next, self._size
        return clone

    def extend(self, batch: Union[TransitionBatch, Sequence[Transition]]) -> None:
        """Appends model transitions, evicting the oldest ones beyond capacity."""
        if not isinstance(batch, TransitionBatch):
            if any(t.origin is not Origin.MODEL for t in batch):
                raise ValueError("D_model only holds model transitions")
            batch = TransitionBatch.from_transitions(batch)
        count = len(batch)
        if count == 0:
            return
        if count > self.capacity:
            batch = TransitionBatch(*(column[-self.capacity:] for column in batch))
            count = self.capacity
        slots = (self._next + np.arange(count)) % self.capacity
        for target, source in zip(self._columns, batch):
            target[slots] = source
        self._next = int((self._next + count) % self.capacity)
        self._size = min(self._size + count, self.capacity)

    def _order(self) -> np.ndarray:
        start = (self._next - self._size) % self.capacity
        return (start + np.arange(self._size)) % self.capacity

    def transitions(self) -> List[Transition]:
        """Contents from oldest to newest."""
        order = self._order()
        return TransitionBatch(*(column[order] for column in self._columns)).to_transitions()

    def sample(self, batch: int, rng: np.random.Generator) -> TransitionBatch:
        """Uniform draw with replacement."""
        if self._size == 0:
            raise EmptyDatasetError("D_model is empty")
        slots = self._order()[rng.integers(self._size, size=batch)]
        return TransitionBatch(*(column[slots] for column in self._columns))


@dataclass
class OfflineArtifacts:
    """Everything the online stage inherits from the offline stage."""

    policy: Policy
    q: QTable
    model: EnsembleModel
    model_buffer: ModelBuffer
    uncertainty: UncertaintyTable
    dataset: Dataset
    discount: float


def rollout_batch(
    model: EnsembleModel,
    pi: Policy,
    starts: Sequence[int],
    horizon: int,
    lam: float,
    rng: np.random.Generator,
    u: Optional[UncertaintyTable] = None,
) -> TransitionBatch:
    """Branched model rollouts with penalized rewards, in columnar form."""
    if horizon < 1:
        raise ValueError(f"rollout length must be at least 1, got {horizon}")
    if lam < 0:
        raise ValueError(f"penalty coefficient must be nonnegative, got {lam}")
    penalty = (uncertainty(model) if u is None else u).values
    probs = pi.at(0)
    states = np.asarray(starts, dtype=int)
    states = states[~model.terminal[states]]
    chunks = []
    for step in range(horizon):
        if states.size == 0:
            break
        actions = sample_rows(probs[states], rng)
        next_states, rewards, _ = sample_steps(model, states, actions, rng)
        done = model.terminal[next_states]
        chunks.append((
            states, actions, rewards - lam * penalty[states, actions],
            next_states, done, np.full(states.size, step),
        ))
        states = next_states[~done]
    if not chunks:
        return TransitionBatch(*(np.zeros(0, dtype=d) for d in (int, int, float, int, bool, int)))
    return TransitionBatch(*(np.concatenate(column) for column in zip(*chunks)))


def rollout(
    model: EnsembleModel,
    pi: Policy,
    starts: Sequence[int],
    horizon: int,
    lam: float,
    rng: np.random.Generator,
    u: Optional[UncertaintyTable] = None,
) -> List[Transition]:
    """Rolls the ensemble out from ``starts`` for up to ``horizon`` steps.

    Args:
        model (EnsembleModel): Fitted ensemble.
        pi (Policy): Stationary rollout policy.
        starts (Sequence[int]): Start states.
        horizon (int): Rollout length H >= 1.
        lam (float): Penalty coefficient.
        rng (np.random.Generator): Sampling stream.
        u (Optional[UncertaintyTable]): Precomputed uncertainty.

    Returns:
        List[Transition]: At most len(starts)*H model transitions, step-major,
        with rewards r^_k(s,a) - lam*u(s,a).
    """
    return rollout_batch(model, pi, starts, horizon, lam, rng, u).to_transitions(Origin.MODEL)


def q_update(
    q: QTable, batch: Union[TransitionBatch, Sequence[Transition]], gamma: float
) -> None:
    """One minibatch Q-learning step, applied in place.

    Targets r + gamma*max_a' q(s',a') are computed from the table before the
    step, with zero bootstrap at terminal successors. Each distinct (s,a) in
    the batch moves by lr*(mean target - q(s,a)).
    """
    if not isinstance(batch, TransitionBatch):
        batch = TransitionBatch.from_transitions(batch)
    if len(batch) == 0:
        raise ValueError("q_update needs a nonempty batch")
    bootstrap = np.where(batch.done, 0.0, q.q[batch.next_states].max(axis=1))
    targets = batch.rewards + gamma * bootstrap
    sums = np.zeros_like(q.q)
    counts = np.zeros_like(q.q)
    np.add.at(sums, (batch.states, batch.actions), targets)
    np.add.at(counts, (batch.states, batch.actions), 1.0)
    seen = counts > 0
    q.q[seen] += q.learning_rate * (sums[seen] / counts[seen] - q.q[seen])


def evaluate(pi: Policy, true_mdp: FiniteMdp) -> float:
    """Exact eta_M(pi) on the ground-truth MDP."""
    return expected_return(true_mdp, pi)


def monte_carlo_return(
    stepper: Stepper, pi: Policy, episodes: int, seed: int
) -> Tuple[float, float]:
    """Mean discounted episode return and its standard error."""
    rng = np.random.default_rng(seed)
    stepper.reset(seed=seed + 1)
    gamma = stepper.mdp.discount
    returns = np.zeros(episodes)
    for episode in range(episodes):
        state, total, weight = stepper.reset(), 0.0, 1.0
        while True:
            state, reward, terminated, truncated = stepper.step(sample_index(pi.at(0)[state], rng))
            total += weight * reward
            weight *= gamma
            if terminated or truncated:
                break
        returns[episode] = total
    return float(returns.mean()), float(returns.std(ddof=1) / math.sqrt(episodes))


def train_offline(
    d_off: Dataset,
    cfg: TrainConfig,
    num_states: int,
    num_actions: int,
    discount: float,
    seed: Optional[int] = None,
) -> OfflineArtifacts:
    """Offline stage: Q learning on uncertainty-penalized model rollouts.

    The ensemble is fit on D_off with uniform weights; rollouts start from
    dataset states and Q is updated until one round changes it by less than
    ``cfg.offline_tol``.
    """
    if not len(d_off):
        raise EmptyDatasetError("offline training needs a nonempty dataset")
    seed = cfg.seed if seed is None else seed
    fit_stream, rollout_stream = np.random.SeedSequence([seed, 0]).spawn(2)
    rng = np.random.default_rng(rollout_stream)
    model = fit_ensemble(
        d_off.transitions, num_states, num_actions, cfg.ensemble_size, cfg.smoothing,
        seed=int(fit_stream.generate_state(1)[0]),
    )
    u = uncertainty(model)
    q = QTable.zeros(num_states, num_actions, learning_rate=cfg.learning_rate,
                     temperature=cfg.temperature)
    model_buffer = ModelBuffer(cfg.model_buffer_capacity)
    change = float("inf")
    start_pool = np.fromiter((t.state for t in d_off), dtype=int, count=len(d_off))

    for round_index in range(cfg.offline_rounds):
        starts = start_pool[rng.integers(start_pool.size, size=cfg.rollout_batch)]
        model_buffer.extend(rollout_batch(
            model, q.boltzmann_policy(), starts, cfg.rollout_length, cfg.penalty, rng, u
        ))
        if not len(model_buffer):
            continue
        before = q.q.copy()
        for _ in range(cfg.updates_per_step):
            q_update(q, model_buffer.sample(cfg.batch_size, rng), discount)
        change = float(np.max(np.abs(q.q - before)))
        if change < cfg.offline_tol:
            logger.info("Offline Q converged after %d rounds", round_index + 1)
            break
    else:
        logger.info("Offline Q stopped after %d rounds (last change %.3g)", cfg.offline_rounds, change)
    return OfflineArtifacts(q.greedy_policy(), q, model, model_buffer, u, d_off, discount)


class _BufferView(NamedTuple):
    states: np.ndarray
    offline: np.ndarray
    entries: Tuple[Transition, ...]


def _view(buffer: PriorityBuffer) -> _BufferView:
    entries = tuple(buffer.entries())
    states = np.fromiter((t.state for t in entries), dtype=int, count=len(entries))
    return _BufferView(states, buffer.is_offline(), entries)


def _draw_indices(
    scheme: Scheme,
    buffer: PriorityBuffer,
    view: _BufferView,
    count: int,
    rng: np.random.Generator,
) -> np.ndarray:
    """Slots drawn from D_off and D_on the way ``scheme`` weighs them."""
    if scheme is Scheme.PRIORITIZED:
        return buffer.sample_indices(count, rng)
    online = np.flatnonzero(~view.offline)
    if scheme is Scheme.PURE_ONLINE and online.size:
        return online[rng.integers(online.size, size=count)]
    if scheme is Scheme.HALF_HALF and online.size:
        offline = np.flatnonzero(view.offline)
        from_offline = math.ceil(count / 2)
        return np.concatenate([
            offline[rng.integers(offline.size, size=from_offline)],
            online[rng.integers(online.size, size=count - from_offline)],
        ])
    return rng.integers(view.states.size, size=count)


def _expected_fraction(scheme: Scheme, n_off: int, n_on: int, t: int, alpha: float) -> float:
    if scheme is Scheme.PRIORITIZED:
        return expected_offline_fraction(n_off, n_on, t, alpha)
    if scheme is Scheme.UNIFORM or n_on == 0:
        return n_off / (n_off + n_on)
    return 0.5 if scheme is Scheme.HALF_HALF else 0.0


@dataclass
class _Refit:
    model: EnsembleModel
    observed_fraction: float
    expected_fraction: float


def _refit_model(
    scheme: Scheme,
    buffer: PriorityBuffer,
    cfg: TrainConfig,
    num_states: int,
    num_actions: int,
    rng: np.random.Generator,
) -> Optional[_Refit]:
    """Full refit on the scheme's effective dataset; None when it is empty."""
    view = _view(buffer)
    n_on = int((~view.offline).sum())
    size = n_on if scheme is Scheme.PURE_ONLINE else len(view.entries)
    if size == 0:
        return None
    drawn: List[np.ndarray] = []

    def resample(member_rng: np.random.Generator) -> np.ndarray:
        index = _draw_indices(scheme, buffer, view, size, member_rng)
        drawn.append(index)
        return index

    model = fit_ensemble(
        view.entries, num_states, num_actions, cfg.ensemble_size, cfg.smoothing,
        seed=int(rng.integers(2**63)), resampler=resample,
    )
    observed = float(view.offline[np.concatenate(drawn)].mean())
    expected = _expected_fraction(
        scheme, len(view.entries) - n_on, n_on, buffer.epoch, cfg.alpha
    )
    logger.debug(
        "Refit %s on %d entries: offline share %.3f (expected %.3f)", scheme.value, size, observed, expected
    )
    return _Refit(model, observed, expected)


def _nanmean(values: Sequence[float]) -> float:
    return float(np.mean(values)) if values else float("nan")


def train_online(
    offline: OfflineArtifacts,
    stepper: Stepper,
    cfg: TrainConfig,
    scheme: Union[Scheme, str],
    true_mdp: FiniteMdp,
    seed: Optional[int] = None,
    header: Optional[dict] = None,
) -> MetricsLog:
    """Online stage: T epochs of S real steps with periodic model refits.

    Args:
        offline (OfflineArtifacts): Output of :func:`train_offline`.
        stepper (Stepper): Real environment; reseeded from ``seed``.
        cfg (TrainConfig): Hyper-parameters.
        scheme (Union[Scheme, str]): Data sampling scheme.
        true_mdp (FiniteMdp): Ground truth used for exact evaluation only.
        seed (Optional[int]): Run seed; defaults to ``cfg.seed``.
        header (Optional[dict]): Extra run-header entries for the log.

    Returns:
        MetricsLog: One row per epoch.
    """
    scheme = Scheme(scheme)
    seed = cfg.seed if seed is None else seed
    num_states, num_actions = true_mdp.num_states, true_mdp.num_actions
    gamma, initial_dist = offline.discount, true_mdp.initial_dist
    env_stream, act_stream, fit_stream, rollout_stream, update_stream = (
        np.random.SeedSequence([seed, 1]).spawn(5)
    )
    act_rng = np.random.default_rng(act_stream)
    fit_rng = np.random.default_rng(fit_stream)
    rollout_rng = np.random.default_rng(rollout_stream)
    update_rng = np.random.default_rng(update_stream)

    buffer = PriorityBuffer(alpha=cfg.alpha)
    buffer.extend(offline.dataset.transitions, t=1)
    q = offline.q.copy()
    model, u = offline.model, offline.uncertainty
    model_buffer = offline.model_buffer.copy()
    temperature = cfg.temperature
    previous_model = model.as_mdp(initial_dist, gamma)

    eta_off = evaluate(offline.policy, true_mdp)
    log_header = {"scheme": scheme.value, "seed": str(seed), "eta_off": repr(eta_off)}
    log_header.update(header or {})
    log = MetricsLog(header=log_header)
    logger.info("Online stage (%s, seed %d) starts from eta_off=%.4f", scheme.value, seed, eta_off)

    state = stepper.reset(seed=int(env_stream.generate_state(1)[0]))
    for epoch in range(1, cfg.epochs + 1):
        started = time.perf_counter()
        buffer.set_epoch(epoch)
        visited = set()
        observed, expected = [], []
        for tau in range(1, cfg.steps_per_epoch + 1):
            action = q.act(state, act_rng, temperature)
            next_state, reward, terminated, truncated = stepper.step(action)
            buffer.add(Transition(
                state, action, reward, next_state, terminated, Origin.ONLINE, stepper.elapsed - 1
            ))
            visited.add((state, action))
            state = stepper.reset() if terminated or truncated else next_state

            if tau % cfg.model_update_freq == 0:
                refit = _refit_model(scheme, buffer, cfg, num_states, num_actions, fit_rng)
                if refit is None:
                    logger.warning(
                        "Epoch %d step %d: %s has no data to fit, keeping the previous model",
                        epoch, tau, scheme.value,
                    )
                else:
                    model, u = refit.model, uncertainty(refit.model)
                    observed.append(refit.observed_fraction)
                    expected.append(refit.expected_fraction)
                view = _view(buffer)
                starts = view.states[
                    _draw_indices(scheme, buffer, view, cfg.rollout_batch, rollout_rng)
                ]
                model_buffer.extend(rollout_batch(
                    model, q.boltzmann_policy(temperature), starts,
                    cfg.rollout_length, cfg.penalty, rollout_rng, u,
                ))
            if len(model_buffer):
                for _ in range(cfg.updates_per_step):
                    q_update(q, model_buffer.sample(cfg.batch_size, update_rng), gamma)
        temperature *= cfg.temperature_decay

        model_hat = model.as_mdp(initial_dist, gamma)
        model_tilde = model.as_mdp(initial_dist, gamma, reward=penalized_reward(model, u, cfg.penalty))
        _, pi_star = value_iteration_discounted(model_tilde)
        occupancy = occupancy_measure(model_hat, pi_star)
        row = EpochMetrics(
            epoch=epoch,
            expected_return=evaluate(q.greedy_policy(), true_mdp),
            offline_fraction=_nanmean(observed),
            expected_offline_fraction=_nanmean(expected),
            mean_uncertainty=u.mean_over(sorted(visited)),
            policy_uncertainty=policy_uncertainty(model_hat, u, pi_star),
            model_return=expected_return(model_hat, pi_star),
            model_shift=dynamics_distance(previous_model, model_hat).value,
            model_error=occupancy.expectation(row_l1_distances(model_hat, true_mdp)),
            model_refits=len(observed),
            wall_clock_seconds=time.perf_counter() - started,
        )
        log.append(row)
        previous_model = model_hat
        logger.info(
            "Epoch %d/%d: return %.4f, mean u %.4f, offline fraction %.3f",
            epoch, cfg.epochs, row.expected_return, row.mean_uncertainty, row.offline_fraction,
        )
    return log
