"""Ring-buffer experience replay with seeded uniform sampling."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np


@dataclass
class Transition:
    s: np.ndarray
    a: Sequence[np.ndarray]
    r: np.ndarray
    s_next: np.ndarray
    terminal: bool


@dataclass
class Batch:
    """Column-stacked minibatch: ``a[i]`` is agent i's actions, shape [B, d_i]."""

    s: np.ndarray
    a: list[np.ndarray]
    r: np.ndarray
    s_next: np.ndarray
    terminal: np.ndarray
    indices: np.ndarray

    def __len__(self) -> int:
        return self.s.shape[0]


class ReplayBuffer:
    """Fixed-capacity FIFO store of joint transitions.

    Storage is allocated up front with ``np.empty``; untouched pages cost
    nothing, so the default capacity of 1e6 is cheap for small games.
    """

    def __init__(self, state_dim: int, action_dims: Sequence[int], capacity: int = 1_000_000):
        if capacity < 1:
            raise ValueError("capacity must be positive")
        self.capacity = int(capacity)
        self.action_dims = [int(d) for d in action_dims]
        self.n_agents = len(self.action_dims)
        self.state_dim = int(state_dim)
        self._s = np.empty((capacity, state_dim))
        self._s2 = np.empty((capacity, state_dim))
        self._a = [np.empty((capacity, d)) for d in self.action_dims]
        self._r = np.empty((capacity, self.n_agents))
        self._d = np.empty(capacity, dtype=bool)
        self.cursor = 0
        self.size = 0

    def __len__(self) -> int:
        return self.size

    def push(self, t: Transition) -> None:
        if len(t.a) != self.n_agents or np.size(t.r) != self.n_agents:
            raise ValueError(
                f"buffer holds {self.n_agents} agents; transition has {len(t.a)} actions "
                f"and {np.size(t.r)} rewards"
            )
        j = self.cursor
        self._s[j] = t.s
        self._s2[j] = t.s_next
        for i, a in enumerate(t.a):
            self._a[i][j] = a
        self._r[j] = t.r
        self._d[j] = t.terminal
        self.cursor = (j + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def get(self, index: int) -> Transition:
        if not 0 <= index < self.size:
            raise IndexError(index)
        return Transition(
            self._s[index].copy(),
            [a[index].copy() for a in self._a],
            self._r[index].copy(),
            self._s2[index].copy(),
            bool(self._d[index]),
        )

    def sample_batch(self, batch_size: int, rng: np.random.Generator) -> Batch:
        """Uniform draws with replacement."""
        if self.size == 0:
            raise ValueError("cannot sample from an empty replay buffer")
        idx = rng.integers(0, self.size, size=batch_size)
        return Batch(
            s=self._s[idx],
            a=[a[idx] for a in self._a],
            r=self._r[idx],
            s_next=self._s2[idx],
            terminal=self._d[idx],
            indices=idx,
        )
