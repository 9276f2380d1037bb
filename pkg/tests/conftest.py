# tests/conftest.py
import sys
import os

import numpy as np
import pytest

project_root = os.path.abspath(os.path.join(os.path.dirname(__file__), '..'))
if project_root not in sys.path:
    sys.path.insert(0, project_root)

from lab.envs import EnvSpec, build_env  # noqa: E402
from lab.mdp_core import FiniteMdp  # noqa: E402


def make_random_mdp(seed: int, num_states: int = 5, num_actions: int = 3,
                    discount: float = 0.9, horizon=None) -> FiniteMdp:
    """Builds a dense random MDP with rewards in [-1, 1]."""
    rng = np.random.default_rng(seed)
    transition = rng.dirichlet(np.ones(num_states), size=(num_states, num_actions))
    reward = rng.uniform(-1.0, 1.0, size=(num_states, num_actions))
    return FiniteMdp(transition, reward, np.full(num_states, 1.0 / num_states), discount, horizon)


def absorbing_mdp(reward: float = 1.0, discount: float = 0.9) -> FiniteMdp:
    """One state, one action, self-loop with a constant reward."""
    return FiniteMdp(np.ones((1, 1, 1)), np.full((1, 1), reward), np.ones(1), discount)


@pytest.fixture
def random_mdp() -> FiniteMdp:
    """Provides a 5-state, 3-action random MDP."""
    return make_random_mdp(0)


@pytest.fixture
def small_grid():
    """Provides a 3x3 slippery gridworld as (spec, mdp, stepper)."""
    spec = EnvSpec("gridworld", 3, 0.1, 20, 0.9)
    mdp, stepper = build_env(spec, seed=0)
    return spec, mdp, stepper
