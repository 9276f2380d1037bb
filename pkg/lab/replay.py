"""Prioritized replay over offline and online transitions.

Priorities follow a two-case rule: online transitions always weigh 1.0,
offline transitions weigh 1/(alpha*t) in online epoch t. Sampling is
proportional to priority through a sum tree.
"""

import logging
from collections import deque
from pathlib import Path
from typing import Iterator, List, Optional, Sequence, Union

import numpy as np

from lab.envs import Origin, Transition, format_transitions
from lab.errors import EmptyDatasetError

logger = logging.getLogger(__name__)


def priority_of(origin: Union[Origin, str], t: int, alpha: float) -> float:
    """Priority of a transition of the given origin at online epoch t.

    Args:
        origin (Union[Origin, str]): "offline" or "online".
        t (int): Online epoch, t >= 1.
        alpha (float): Decay constant, alpha > 0.

    Returns:
        float: 1/(alpha*t) for offline data, 1.0 for online data.
    """
    if t < 1:
        raise ValueError(f"epoch must be at least 1, got {t}")
    if alpha <= 0:
        raise ValueError(f"alpha must be positive, got {alpha}")
    origin = Origin(origin)
    if origin is Origin.ONLINE:
        return 1.0
    if origin is Origin.OFFLINE:
        return 1.0 / (alpha * t)
    raise ValueError("model transitions carry no replay priority")


def expected_offline_fraction(n_off: int, n_on: int, t: int, alpha: float) -> float:
    """Probability that one prioritized draw returns an offline transition."""
    if n_off + n_on < 1:
        raise ValueError("need at least one transition")
    offline_mass = n_off * priority_of(Origin.OFFLINE, t, alpha)
    return offline_mass / (offline_mass + n_on * 1.0)


class SumTree:
    """Binary tree whose internal nodes hold the sum of their children.

    Leaves live at indices ``capacity - 1 .. 2*capacity - 2`` of a flat
    array. Capacity is a power of two and doubles on demand.
    """

    def __init__(self, capacity: int = 1) -> None:
        self.capacity = self._round_up(capacity)
        self.tree = np.zeros(2 * self.capacity - 1)

    @staticmethod
    def _round_up(capacity: int) -> int:
        return 1 << max(0, int(capacity - 1).bit_length())

    @property
    def total(self) -> float:
        return float(self.tree[0])

    def leaves(self) -> np.ndarray:
        return self.tree[self.capacity - 1:]

    def grow(self, capacity: int) -> None:
        """Enlarges the tree so it holds at least ``capacity`` leaves."""
        if capacity <= self.capacity:
            return
        old = self.leaves().copy()
        self.capacity = self._round_up(capacity)
        self.tree = np.zeros(2 * self.capacity - 1)
        self.tree[self.capacity - 1:self.capacity - 1 + old.size] = old
        self.rebuild()

    def update(self, leaf: int, priority: float) -> None:
        """Sets one leaf and recomputes the sums on its path to the root."""
        index = leaf + self.capacity - 1
        self.tree[index] = priority
        while index > 0:
            index = (index - 1) // 2
            self.tree[index] = self.tree[2 * index + 1] + self.tree[2 * index + 2]

    def set_many(self, leaves: np.ndarray, priorities: Union[float, np.ndarray]) -> None:
        self.tree[np.asarray(leaves, dtype=int) + self.capacity - 1] = priorities
        self.rebuild()

    def rebuild(self) -> None:
        """Recomputes every internal node level by level, bottom-up."""
        width = self.capacity // 2
        while width >= 1:
            start = width - 1
            parents = np.arange(start, start + width)
            self.tree[parents] = self.tree[2 * parents + 1] + self.tree[2 * parents + 2]
            width //= 2

    def find(self, values: np.ndarray) -> np.ndarray:
        """Maps cumulative-mass values in [0, total) to leaf indices."""
        values = np.array(values, dtype=float)
        nodes = np.zeros(values.shape, dtype=int)
        for _ in range(self.capacity.bit_length() - 1):
            left = 2 * nodes + 1
            right = left + 1
            go_left = (values < self.tree[left]) | (self.tree[right] <= 0.0)
            values = np.where(go_left, values, values - self.tree[left])
            nodes = np.where(go_left, left, right)
        return nodes - (self.capacity - 1)

    def max_inconsistency(self) -> float:
        """Largest |node - (left + right)| over all internal nodes."""
        if self.capacity == 1:
            return 0.0
        parents = np.arange(self.capacity - 1)
        children = self.tree[2 * parents + 1] + self.tree[2 * parents + 2]
        return float(np.max(np.abs(self.tree[parents] - children)))


class PriorityBuffer:
    """Replay store for D_off and D_on with epoch-decaying offline priorities.

    Offline entries are never evicted. When ``capacity`` is reached the
    oldest online entry gives up its slot.
    """

    def __init__(self, alpha: float = 1.0, capacity: Optional[int] = None) -> None:
        """Initializes an empty buffer at epoch 1.

        Args:
            alpha (float): Offline priority decay constant.
            capacity (Optional[int]): Maximum number of entries, unbounded if None.
        """
        if alpha <= 0:
            raise ValueError(f"alpha must be positive, got {alpha}")
        if capacity is not None and capacity < 1:
            raise ValueError(f"capacity must be positive, got {capacity}")
        self.alpha = alpha
        self.capacity = capacity
        self.epoch = 1
        self.tree = SumTree(capacity or 1)
        self._entries: List[Transition] = []
        self._offline = np.zeros(0, dtype=bool)
        self._online_slots: deque = deque()

    def __len__(self) -> int:
        return len(self._entries)

    def __iter__(self) -> Iterator[Transition]:
        return iter(self._entries)

    @property
    def total_priority(self) -> float:
        return self.tree.total

    @property
    def offline_count(self) -> int:
        return int(self._offline[:len(self._entries)].sum())

    @property
    def online_count(self) -> int:
        return len(self._entries) - self.offline_count

    def entries(self) -> Sequence[Transition]:
        return tuple(self._entries)

    def is_offline(self) -> np.ndarray:
        """Offline flag per slot, aligned with :meth:`entries`."""
        return self._offline[:len(self._entries)].copy()

    def priorities(self) -> np.ndarray:
        return self.tree.leaves()[:len(self._entries)].copy()

    def set_epoch(self, t: int) -> None:
        """Moves to online epoch t and re-prioritizes every offline entry."""
        if t < self.epoch:
            raise ValueError(f"epoch cannot move backwards from {self.epoch} to {t}")
        self.epoch = t
        offline_slots = np.flatnonzero(self._offline[:len(self._entries)])
        if offline_slots.size:
            self.tree.set_many(offline_slots, priority_of(Origin.OFFLINE, t, self.alpha))
        logger.debug(
            "Epoch %d: %d offline entries at priority %.4g",
            t, offline_slots.size, 1.0 / (self.alpha * t),
        )

    def add(self, transition: Transition, t: Optional[int] = None) -> None:
        """Inserts a transition with the priority of its origin at epoch t."""
        if t is not None and t != self.epoch:
            self.set_epoch(t)
        priority = priority_of(transition.origin, self.epoch, self.alpha)
        offline = transition.origin is Origin.OFFLINE
        if self.capacity is not None and len(self._entries) >= self.capacity:
            if not self._online_slots:
                raise ValueError("buffer is full of offline entries, which are never evicted")
            slot = self._online_slots.popleft()
            self._entries[slot] = transition
        else:
            slot = len(self._entries)
            self._entries.append(transition)
            if slot >= self.tree.capacity:
                self.tree.grow(slot + 1)
            if slot >= self._offline.size:
                self._offline = np.concatenate(
                    [self._offline, np.zeros(max(slot + 1, self._offline.size), dtype=bool)]
                )
        self._offline[slot] = offline
        if not offline:
            self._online_slots.append(slot)
        self.tree.update(slot, priority)

    def extend(self, transitions: Sequence[Transition], t: Optional[int] = None) -> None:
        for transition in transitions:
            self.add(transition, t)

    def sample_indices(self, batch: int, rng: np.random.Generator) -> np.ndarray:
        """Draws ``batch`` slots with replacement, proportional to priority."""
        if not self._entries:
            raise EmptyDatasetError("cannot sample from an empty buffer")
        if batch < 1:
            raise ValueError(f"batch must be at least 1, got {batch}")
        return self.tree.find(rng.random(batch) * self.tree.total)

    def sample(self, batch: int, rng: np.random.Generator) -> List[Transition]:
        return [self._entries[i] for i in self.sample_indices(batch, rng)]

    def dump(self, path: Union[str, Path], env_id: str = "") -> None:
        """Writes the buffer contents in the dataset text format."""
        Path(path).write_text(format_transitions(self._entries, env_id, "replay", self.epoch))
        logger.info("Dumped %d replay entries to %s", len(self._entries), path)
