"""Markov games with continuous box actions, and the two Differential Games.

A game is anything with a :class:`GameSpec`, ``reset(seed)`` and a pure
``step(state, joint_action)``. Differential Games are single-state: every
episode lasts one step and the state never changes.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class GameSpec:
    n_agents: int
    state_dim: int
    action_dims: tuple[int, ...]
    gamma: float = 0.99
    max_episode_length: int = 1

    def __post_init__(self):
        if len(self.action_dims) != self.n_agents:
            raise ValueError(f"{self.n_agents} agents but {len(self.action_dims)} action dims")
        if not 0.0 < self.gamma < 1.0:
            raise ValueError(f"gamma must lie in (0, 1), got {self.gamma}")


@dataclass(frozen=True)
class StepResult:
    next_state: np.ndarray
    rewards: np.ndarray
    terminal: bool


class MarkovGame:
    """Base class. Subclasses implement ``initial_state`` and ``transition``."""

    name = "game"
    spec: GameSpec

    def reset(self, seed: int | None = None) -> np.ndarray:
        return self.initial_state(np.random.default_rng(seed))

    def step(self, state: np.ndarray, joint_action: Sequence[np.ndarray]) -> StepResult:
        if len(joint_action) != self.spec.n_agents:
            raise ValueError(f"expected {self.spec.n_agents} actions, got {len(joint_action)}")
        acts = []
        for i, a in enumerate(joint_action):
            a = np.asarray(a, dtype=np.float64).reshape(self.spec.action_dims[i])
            if np.any(np.abs(a) > 1.0):
                log.warning("agent %d action %s outside [-1, 1]; clamped", i, a)
                a = np.clip(a, -1.0, 1.0)
            acts.append(a)
        return self.transition(np.asarray(state, dtype=np.float64), acts)

    def initial_state(self, rng: np.random.Generator) -> np.ndarray:
        raise NotImplementedError

    def transition(self, state: np.ndarray, actions: list[np.ndarray]) -> StepResult:
        raise NotImplementedError


def reward_zero_sum(a1: float, a2: float) -> tuple[float, float]:
    r1 = 10.0 * a1 * 10.0 * a2
    return r1, -r1


def reward_max_two(a1: float, a2: float) -> tuple[float, float]:
    f1 = 0.8 * (-(((a1 + 0.5) / 0.3) ** 2) - ((a2 + 0.5) / 0.3) ** 2)
    f2 = 1.0 * (-(((a1 - 0.5) / 0.1) ** 2) - ((a2 - 0.5) / 0.1) ** 2) + 10.0
    r = max(f1, f2)
    return r, r


def max_two_landscape(a1: np.ndarray, a2: np.ndarray) -> np.ndarray:
    """Vectorised Max of Two reward."""
    f1 = 0.8 * (-(((a1 + 0.5) / 0.3) ** 2) - ((a2 + 0.5) / 0.3) ** 2)
    f2 = -(((a1 - 0.5) / 0.1) ** 2) - ((a2 - 0.5) / 0.1) ** 2 + 10.0
    return np.maximum(f1, f2)


def zero_sum_landscape(a1: np.ndarray, a2: np.ndarray) -> np.ndarray:
    """Vectorised Zero Sum reward of agent 1."""
    return 100.0 * a1 * a2


class DifferentialGame(MarkovGame):
    """Two-player single-state game with scalar actions.

    The global state is the constant vector ``[1, 1]``: a one-hot identity
    encoding with both players present.
    """

    def __init__(self, name: str, reward_fn: Callable[[float, float], tuple[float, float]], gamma=0.99):
        self.name = name
        self.reward_fn = reward_fn
        self.spec = GameSpec(n_agents=2, state_dim=2, action_dims=(1, 1), gamma=gamma)

    def initial_state(self, rng):
        return np.ones(2)

    def transition(self, state, actions):
        r = self.reward_fn(float(actions[0][0]), float(actions[1][0]))
        return StepResult(next_state=state.copy(), rewards=np.asarray(r, dtype=np.float64), terminal=True)


class QuadraticCoordinationGame(MarkovGame):
    """Synthetic single-state n-player cooperative game.

    Shared reward ``-sum_i (a_i - target_i)^2``; used for scaling checks
    with n != 2.
    """

    def __init__(self, n_agents: int, action_dim: int = 1, gamma: float = 0.99):
        self.name = f"coord{n_agents}"
        self.spec = GameSpec(n_agents=n_agents, state_dim=n_agents, action_dims=(action_dim,) * n_agents,
                             gamma=gamma)
        self.targets = np.linspace(-0.5, 0.5, n_agents)

    def initial_state(self, rng):
        return np.ones(self.spec.n_agents)

    def transition(self, state, actions):
        r = -sum(float(np.sum((a - t) ** 2)) for a, t in zip(actions, self.targets))
        return StepResult(state.copy(), np.full(self.spec.n_agents, r), True)


_REGISTRY: dict[str, Callable[[], MarkovGame]] = {
    "zero_sum": lambda: DifferentialGame("zero_sum", reward_zero_sum),
    "max_two": lambda: DifferentialGame("max_two", reward_max_two),
}


def register_game(name: str, factory: Callable[[], MarkovGame]) -> None:
    _REGISTRY[name] = factory


def game_names() -> list[str]:
    return sorted(_REGISTRY)


def make_game(name: str) -> MarkovGame:
    if name.startswith("coord") and name[5:].isdigit() and name not in _REGISTRY:
        return QuadraticCoordinationGame(int(name[5:]))
    try:
        return _REGISTRY[name]()
    except KeyError:
        raise ValueError(f"unknown env {name!r}; choose from {', '.join(game_names())}") from None
