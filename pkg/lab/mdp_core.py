"""Exact finite MDPs: solvers, occupancy measures and distances.

Every table is dense. A FiniteMdp with ``horizon`` set is solved with the
backward finite-horizon recursion; without one it is treated as a discounted
infinite-horizon problem. Most operations accept an explicit ``horizon`` that
overrides the one stored on the MDP.
"""

import logging
from dataclasses import dataclass, replace
from pathlib import Path
from typing import NamedTuple, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import linalg

from lab.errors import MdpValidationError

logger = logging.getLogger(__name__)

PROB_TOL = 1e-9
MASS_TOL = 1e-8


def _frozen_array(values, dtype=float) -> np.ndarray:
    array = np.array(values, dtype=dtype)
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class FiniteMdp:
    """A tabular MDP M = (S, A, p, r, mu0, gamma) with an optional horizon.

    Attributes:
        transition (np.ndarray): p(s'|s,a), shape (S, A, S).
        reward (np.ndarray): r(s,a), shape (S, A).
        initial_dist (np.ndarray): mu0 over states, shape (S,).
        discount (float): gamma in (0, 1].
        horizon (Optional[int]): H for finite-horizon mode, else None.
        terminal (Optional[np.ndarray]): boolean flag per state.
    """

    transition: np.ndarray
    reward: np.ndarray
    initial_dist: np.ndarray
    discount: float
    horizon: Optional[int] = None
    terminal: Optional[np.ndarray] = None

    def __post_init__(self) -> None:
        transition = _frozen_array(self.transition)
        if transition.ndim != 3 or transition.shape[0] != transition.shape[2]:
            raise MdpValidationError(
                f"transition must have shape (S, A, S), got {transition.shape}"
            )
        num_states, num_actions = transition.shape[:2]
        if num_states < 1 or num_actions < 1:
            raise MdpValidationError("an MDP needs at least one state and one action")
        terminal = self.terminal
        if terminal is None:
            terminal = np.zeros(num_states, dtype=bool)
        object.__setattr__(self, "transition", transition)
        object.__setattr__(self, "reward", _frozen_array(self.reward))
        object.__setattr__(self, "initial_dist", _frozen_array(self.initial_dist))
        object.__setattr__(self, "terminal", _frozen_array(terminal, dtype=bool))
        object.__setattr__(self, "discount", float(self.discount))
        self._validate()

    def _validate(self) -> None:
        num_states, num_actions = self.num_states, self.num_actions
        if self.reward.shape != (num_states, num_actions):
            raise MdpValidationError(
                f"reward must have shape {(num_states, num_actions)}, got {self.reward.shape}"
            )
        if not np.all(np.isfinite(self.reward)):
            raise MdpValidationError("rewards must be finite")
        if np.any(self.transition < 0):
            raise MdpValidationError("transition probabilities must be nonnegative")
        row_error = np.abs(self.transition.sum(axis=2) - 1.0)
        if np.any(row_error > PROB_TOL):
            state, action = np.unravel_index(int(np.argmax(row_error)), row_error.shape)
            raise MdpValidationError(
                f"transition row ({state}, {action}) must sum to 1, "
                f"off by {row_error[state, action]:.3g}"
            )
        if self.initial_dist.shape != (num_states,):
            raise MdpValidationError(
                f"initial_dist must have shape {(num_states,)}, got {self.initial_dist.shape}"
            )
        if np.any(self.initial_dist < 0) or abs(self.initial_dist.sum() - 1.0) > PROB_TOL:
            raise MdpValidationError("initial_dist must be a probability vector")
        if not 0.0 < self.discount <= 1.0:
            raise MdpValidationError(f"discount must lie in (0, 1], got {self.discount}")
        if self.horizon is not None and (int(self.horizon) != self.horizon or self.horizon < 1):
            raise MdpValidationError(f"horizon must be a positive integer, got {self.horizon}")
        if self.terminal.shape != (num_states,):
            raise MdpValidationError("terminal must hold one flag per state")
        for state in np.flatnonzero(self.terminal):
            if not np.all(self.transition[state, :, state] == 1.0):
                raise MdpValidationError(f"terminal state {state} must self-loop")
            if np.any(self.reward[state] != 0.0):
                raise MdpValidationError(f"terminal state {state} must have zero reward")

    @property
    def num_states(self) -> int:
        return self.transition.shape[0]

    @property
    def num_actions(self) -> int:
        return self.transition.shape[1]

    def with_reward(self, reward: np.ndarray) -> "FiniteMdp":
        """Returns a copy of this MDP with a different reward table."""
        return replace(self, reward=reward)

    def with_transition(self, transition: np.ndarray) -> "FiniteMdp":
        """Returns a copy of this MDP with different dynamics."""
        return replace(self, transition=transition)

    def with_horizon(self, horizon: Optional[int]) -> "FiniteMdp":
        """Returns a copy of this MDP switched to the given horizon mode."""
        return replace(self, horizon=horizon)


@dataclass(frozen=True, eq=False)
class Policy:
    """A stochastic policy table pi(a|s), stationary or indexed by horizon.

    Deterministic policies are stored as one-hot rows so that every solver
    handles both kinds through the same code path.

    Attributes:
        table (np.ndarray): shape (S, A) for a stationary policy or (H, S, A)
            for a per-horizon policy.
    """

    table: np.ndarray

    def __post_init__(self) -> None:
        table = _frozen_array(self.table)
        if table.ndim not in (2, 3):
            raise MdpValidationError(f"policy table must be 2-D or 3-D, got {table.ndim}-D")
        if np.any(table < 0) or np.any(np.abs(table.sum(axis=-1) - 1.0) > PROB_TOL):
            raise MdpValidationError("policy rows must be probability vectors")
        object.__setattr__(self, "table", table)

    @classmethod
    def deterministic(cls, actions: Sequence[int], num_actions: int) -> "Policy":
        """Builds a deterministic policy from an action per state.

        Args:
            actions (Sequence[int]): shape (S,) or (H, S) action indices.
            num_actions (int): Size of the action space.

        Returns:
            Policy: One-hot policy table.
        """
        actions = np.asarray(actions, dtype=int)
        if np.any(actions < 0) or np.any(actions >= num_actions):
            raise MdpValidationError("deterministic actions out of range")
        return cls(np.eye(num_actions)[actions])

    @classmethod
    def uniform(cls, num_states: int, num_actions: int) -> "Policy":
        return cls(np.full((num_states, num_actions), 1.0 / num_actions))

    @property
    def per_horizon(self) -> bool:
        return self.table.ndim == 3

    @property
    def num_states(self) -> int:
        return self.table.shape[-2]

    @property
    def num_actions(self) -> int:
        return self.table.shape[-1]

    @property
    def is_deterministic(self) -> bool:
        return bool(np.all((self.table == 0.0) | (self.table == 1.0)))

    def at(self, h: int = 0) -> np.ndarray:
        """Returns the (S, A) table used at horizon step h."""
        if not self.per_horizon:
            return self.table
        if not 0 <= h < self.table.shape[0]:
            raise ValueError(f"per-horizon policy has no step {h}")
        return self.table[h]

    def actions(self, h: int = 0) -> np.ndarray:
        """Most likely action per state at step h, lowest index on ties."""
        return self.at(h).argmax(axis=1)


@dataclass(frozen=True, eq=False)
class ValueTable:
    """State values in finite-horizon (V[h][s]) or discounted (V[s]) mode.

    Attributes:
        values (np.ndarray): shape (H+1, S) in finite-horizon mode, (S,) otherwise.
        horizon (Optional[int]): H when finite-horizon.
        residuals (Tuple[float, ...]): sup-norm Bellman residual per sweep,
            filled by discounted value iteration.
    """

    values: np.ndarray
    horizon: Optional[int] = None
    residuals: Tuple[float, ...] = ()

    def __post_init__(self) -> None:
        values = _frozen_array(self.values)
        if self.horizon is not None:
            if values.ndim != 2 or values.shape[0] != self.horizon + 1:
                raise MdpValidationError("finite-horizon values must have shape (H+1, S)")
            if np.any(values[self.horizon] != 0.0):
                raise MdpValidationError("finite-horizon values must vanish at h = H")
        elif values.ndim != 1:
            raise MdpValidationError("discounted values must be 1-D")
        object.__setattr__(self, "values", values)

    @property
    def finite_horizon(self) -> bool:
        return self.horizon is not None

    def at(self, h: int = 0) -> np.ndarray:
        return self.values[h] if self.finite_horizon else self.values

    @property
    def initial(self) -> np.ndarray:
        return self.at(0)


@dataclass(frozen=True, eq=False)
class OccupancyMeasure:
    """Unnormalized state-action occupancy rho(s,a).

    Attributes:
        table (np.ndarray): rho, shape (S, A).
        mode (str): "discounted" or "finite_horizon".
        mass (float): Expected total mass, 1/(1-gamma) or sum_{h<H} gamma^h.
    """

    table: np.ndarray
    mode: str
    mass: float

    def __post_init__(self) -> None:
        table = _frozen_array(self.table)
        if self.mode not in ("discounted", "finite_horizon"):
            raise MdpValidationError(f"unknown occupancy mode {self.mode!r}")
        if np.any(table < 0):
            raise MdpValidationError("occupancy entries must be nonnegative")
        if abs(table.sum() - self.mass) > MASS_TOL * max(1.0, self.mass):
            raise MdpValidationError(
                f"occupancy mass {table.sum():.12g} differs from expected {self.mass:.12g}"
            )
        object.__setattr__(self, "table", table)

    def expectation(self, values: np.ndarray) -> float:
        """Returns sum_{s,a} rho(s,a) * values(s,a)."""
        return float(np.sum(self.table * values))


class DynamicsDistance(NamedTuple):
    value: float
    state: int
    action: int


class Extremes(NamedTuple):
    r_max: float
    v_max: float


def _check_policy(mdp: FiniteMdp, pi: Policy) -> None:
    if pi.num_states != mdp.num_states or pi.num_actions != mdp.num_actions:
        raise ValueError(
            f"policy shape {pi.table.shape} does not match mdp "
            f"({mdp.num_states} states, {mdp.num_actions} actions)"
        )


def _resolve_horizon(mdp: FiniteMdp, horizon: Optional[int]) -> Optional[int]:
    return mdp.horizon if horizon is None else horizon


def q_values(mdp: FiniteMdp, next_values: np.ndarray) -> np.ndarray:
    """One Bellman backup: r(s,a) + gamma * sum_s' p(s'|s,a) V(s')."""
    return mdp.reward + mdp.discount * (mdp.transition @ next_values)


def _policy_matrices(mdp: FiniteMdp, probs: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    p_pi = np.einsum("sa,sat->st", probs, mdp.transition)
    r_pi = np.sum(probs * mdp.reward, axis=1)
    return p_pi, r_pi


def value_iteration_finite(
    mdp: FiniteMdp, horizon: Optional[int] = None
) -> Tuple[ValueTable, Policy]:
    """Solves a finite-horizon MDP by backward induction.

    Args:
        mdp (FiniteMdp): The MDP to solve.
        horizon (Optional[int]): H; defaults to ``mdp.horizon``.

    Returns:
        Tuple[ValueTable, Policy]: V*_h for h = 0..H (V*_H = 0) and the greedy
        per-horizon policy, ties broken by lowest action index.
    """
    horizon = _resolve_horizon(mdp, horizon)
    if horizon is None:
        raise ValueError("finite-horizon value iteration needs a horizon")
    if horizon < 0:
        raise ValueError(f"horizon must be nonnegative, got {horizon}")
    values = np.zeros((horizon + 1, mdp.num_states))
    if horizon == 0:
        return ValueTable(values, horizon=0), Policy.deterministic(
            np.zeros(mdp.num_states, dtype=int), mdp.num_actions
        )
    actions = np.zeros((horizon, mdp.num_states), dtype=int)
    rows = np.arange(mdp.num_states)
    for h in reversed(range(horizon)):
        q = q_values(mdp, values[h + 1])
        actions[h] = q.argmax(axis=1)
        values[h] = q[rows, actions[h]]
    return ValueTable(values, horizon=horizon), Policy.deterministic(actions, mdp.num_actions)


def value_iteration_discounted(
    mdp: FiniteMdp, tol: float = 1e-8, max_iterations: int = 100_000
) -> Tuple[ValueTable, Policy]:
    """Solves a discounted MDP to within ``tol`` of V* in sup-norm.

    Sweeps stop once the residual drops to tol*(1-gamma)/gamma, which bounds
    the distance to V* by tol.
    """
    if mdp.discount >= 1.0:
        raise ValueError("discounted value iteration needs discount < 1")
    if tol <= 0:
        raise ValueError(f"tol must be positive, got {tol}")
    gamma = mdp.discount
    threshold = tol * (1.0 - gamma) / gamma
    values = np.zeros(mdp.num_states)
    residuals = []
    for _ in range(max_iterations):
        updated = q_values(mdp, values).max(axis=1)
        residual = float(np.max(np.abs(updated - values)))
        residuals.append(residual)
        values = updated
        if residual <= threshold:
            break
    else:
        logger.warning(
            "Value iteration stopped after %d sweeps with residual %.3g", max_iterations, residuals[-1]
        )
    actions = q_values(mdp, values).argmax(axis=1)
    return (
        ValueTable(values, residuals=tuple(residuals)),
        Policy.deterministic(actions, mdp.num_actions),
    )


def policy_evaluation(mdp: FiniteMdp, pi: Policy, horizon: Optional[int] = None) -> ValueTable:
    """Computes V^pi exactly.

    Finite-horizon mode runs the backward recursion; discounted mode solves
    (I - gamma P_pi) V = r_pi.

    Args:
        mdp (FiniteMdp): The MDP.
        pi (Policy): Stationary or per-horizon policy.
        horizon (Optional[int]): H; defaults to ``mdp.horizon``.

    Returns:
        ValueTable: V^pi in the mode implied by the horizon.
    """
    _check_policy(mdp, pi)
    horizon = _resolve_horizon(mdp, horizon)
    if horizon is not None:
        values = np.zeros((horizon + 1, mdp.num_states))
        for h in reversed(range(horizon)):
            q = q_values(mdp, values[h + 1])
            values[h] = np.sum(pi.at(h) * q, axis=1)
        return ValueTable(values, horizon=horizon)
    if pi.per_horizon:
        raise ValueError("a per-horizon policy needs a horizon")
    if mdp.discount >= 1.0:
        raise ValueError("discounted evaluation needs discount < 1 or a horizon")
    p_pi, r_pi = _policy_matrices(mdp, pi.table)
    values = linalg.solve(np.eye(mdp.num_states) - mdp.discount * p_pi, r_pi)
    return ValueTable(values)


def expected_return(mdp: FiniteMdp, pi: Policy, horizon: Optional[int] = None) -> float:
    """eta(pi) = E_{s ~ mu0}[V^pi(s)]."""
    return float(mdp.initial_dist @ policy_evaluation(mdp, pi, horizon).initial)


def occupancy_measure(
    mdp: FiniteMdp, pi: Policy, horizon: Optional[int] = None
) -> OccupancyMeasure:
    """Computes rho(s,a) = sum_t gamma^t P(s_t = s, a_t = a), unnormalized.

    In finite-horizon mode the sum runs over t < H by forward propagation;
    otherwise the state-visitation system is solved directly.
    """
    _check_policy(mdp, pi)
    horizon = _resolve_horizon(mdp, horizon)
    gamma = mdp.discount
    if horizon is not None:
        table = np.zeros((mdp.num_states, mdp.num_actions))
        state_dist = np.array(mdp.initial_dist)
        weight, mass = 1.0, 0.0
        for h in range(horizon):
            joint = state_dist[:, None] * pi.at(h)
            table += weight * joint
            mass += weight
            state_dist = np.einsum("sa,sat->t", joint, mdp.transition)
            weight *= gamma
        return OccupancyMeasure(table, mode="finite_horizon", mass=mass)
    if pi.per_horizon:
        raise ValueError("a per-horizon policy needs a horizon")
    if gamma >= 1.0:
        raise ValueError("discounted occupancy needs discount < 1 or a horizon")
    p_pi, _ = _policy_matrices(mdp, pi.table)
    visitation = linalg.solve((np.eye(mdp.num_states) - gamma * p_pi).T, mdp.initial_dist)
    table = visitation[:, None] * pi.table
    # the solve leaves round-off negatives around zero
    table = np.where(np.abs(table) < 1e-13, np.abs(table), table)
    return OccupancyMeasure(table, mode="discounted", mass=1.0 / (1.0 - gamma))


def _as_distribution(values, name: str) -> np.ndarray:
    vector = np.asarray(values, dtype=float)
    if vector.ndim != 1:
        raise ValueError(f"{name} must be a 1-D probability vector")
    if np.any(vector < 0) or abs(vector.sum() - 1.0) > PROB_TOL:
        raise MdpValidationError(f"{name} must be a probability vector")
    return vector


def l1_distance(p: Sequence[float], q: Sequence[float]) -> float:
    """sum_s' |p(s') - q(s')|, a value in [0, 2]."""
    p = _as_distribution(p, "p")
    q = _as_distribution(q, "q")
    if p.shape != q.shape:
        raise ValueError(f"length mismatch: {p.shape[0]} vs {q.shape[0]}")
    return float(np.abs(p - q).sum())


def tv_distance(p: Sequence[float], q: Sequence[float]) -> float:
    """Total variation distance; on a countable space it is half the l1 distance."""
    return 0.5 * l1_distance(p, q)


def row_l1_distances(m1: FiniteMdp, m2: FiniteMdp) -> np.ndarray:
    """delta_l1 between p_{M1}(.|s,a) and p_{M2}(.|s,a) for every (s,a)."""
    if m1.transition.shape != m2.transition.shape:
        raise ValueError(
            f"state/action spaces differ: {m1.transition.shape} vs {m2.transition.shape}"
        )
    return np.abs(m1.transition - m2.transition).sum(axis=2)


def dynamics_distance(m1: FiniteMdp, m2: FiniteMdp) -> DynamicsDistance:
    """D_l1 = max over (s,a) of the row l1 distance, with its argmax."""
    rows = row_l1_distances(m1, m2)
    state, action = divmod(int(np.argmax(rows)), m1.num_actions)
    return DynamicsDistance(float(rows[state, action]), state, action)


def extremal_values(mdp: FiniteMdp, horizon: Optional[int] = None) -> Extremes:
    """Returns (r_max, v_max) with v_max the analytic bound r_max*H or r_max/(1-gamma)."""
    return reward_extremes([mdp.reward], mdp.discount, _resolve_horizon(mdp, horizon))


def reward_extremes(
    rewards: Sequence[np.ndarray], discount: float, horizon: Optional[int] = None
) -> Extremes:
    """(r_max, v_max) bounding every reward table in ``rewards`` at once."""
    r_max = max(float(np.max(np.abs(reward))) for reward in rewards)
    if horizon is not None:
        return Extremes(r_max, r_max * horizon)
    if discount >= 1.0:
        raise ValueError("v_max needs discount < 1 or a horizon")
    return Extremes(r_max, r_max / (1.0 - discount))


def sample_rows(rows: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Draws one index per row of a (n, k) probability table."""
    cdf = np.cumsum(rows, axis=1)
    draws = rng.random(rows.shape[0]) * cdf[:, -1]
    return (cdf <= draws[:, None]).sum(axis=1)


def sample_index(probs: np.ndarray, rng: np.random.Generator) -> int:
    return int(sample_rows(np.asarray(probs, dtype=float)[None, :], rng)[0])


def format_mdp(mdp: FiniteMdp) -> str:
    """Serializes an MDP to the line-oriented text format.

    Layout: ``mdp S A gamma horizon``, then the mu0 line, then one line per
    (s,a) in row-major order holding r(s,a) and the S next-state
    probabilities. A trailing ``terminal`` line lists terminal states.
    """
    horizon = "none" if mdp.horizon is None else str(mdp.horizon)
    lines = [f"mdp {mdp.num_states} {mdp.num_actions} {mdp.discount!r} {horizon}"]
    lines.append(" ".join(repr(float(x)) for x in mdp.initial_dist))
    for state in range(mdp.num_states):
        for action in range(mdp.num_actions):
            row = [mdp.reward[state, action], *mdp.transition[state, action]]
            lines.append(" ".join(repr(float(x)) for x in row))
    if mdp.terminal.any():
        lines.append("terminal " + " ".join(str(s) for s in np.flatnonzero(mdp.terminal)))
    return "\n".join(lines) + "\n"


def parse_mdp(text: str) -> FiniteMdp:
    """Parses the text produced by :func:`format_mdp`."""
    lines = [line.split() for line in text.splitlines() if line.strip() and not line.startswith("#")]
    if not lines or lines[0][0] != "mdp" or len(lines[0]) != 5:
        raise MdpValidationError("malformed mdp text: expected 'mdp S A gamma horizon' header")
    _, num_states, num_actions, gamma, horizon = lines[0]
    num_states, num_actions = int(num_states), int(num_actions)
    body = lines[1:]
    terminal = np.zeros(num_states, dtype=bool)
    if body and body[-1][0] == "terminal":
        terminal[[int(s) for s in body[-1][1:]]] = True
        body = body[:-1]
    if len(body) != 1 + num_states * num_actions:
        raise MdpValidationError(
            f"malformed mdp text: expected {1 + num_states * num_actions} rows, got {len(body)}"
        )
    initial_dist = np.array([float(x) for x in body[0]])
    rows = np.array([[float(x) for x in row] for row in body[1:]])
    if rows.shape[1] != num_states + 1:
        raise MdpValidationError("malformed mdp text: each row needs a reward and S probabilities")
    return FiniteMdp(
        transition=rows[:, 1:].reshape(num_states, num_actions, num_states),
        reward=rows[:, 0].reshape(num_states, num_actions),
        initial_dist=initial_dist,
        discount=float(gamma),
        horizon=None if horizon == "none" else int(horizon),
        terminal=terminal,
    )


def save_mdp(mdp: FiniteMdp, path: Union[str, Path]) -> None:
    Path(path).write_text(format_mdp(mdp))
    logger.debug("Saved %d-state mdp to %s", mdp.num_states, path)


def load_mdp(path: Union[str, Path]) -> FiniteMdp:
    return parse_mdp(Path(path).read_text())
