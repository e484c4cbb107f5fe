"""Recursive reasoning graph: level-k actions by message passing between central actors."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ..diffcore import Tape, Tensor


class ReasoningGraph:
    """Nodes are agents' central actors; messages are sampled actions.

    Args:
        n_agents: number of nodes.
        adjacency: boolean [n, n] matrix; defaults to fully connected. The
            diagonal is ignored.
    """

    def __init__(self, n_agents: int, adjacency=None):
        self.n_agents = int(n_agents)
        if adjacency is None:
            adj = np.ones((n_agents, n_agents), dtype=bool)
        else:
            adj = np.array(adjacency, dtype=bool)
            if adj.shape != (n_agents, n_agents):
                raise ValueError(f"adjacency must be {n_agents}x{n_agents}, got {adj.shape}")
        np.fill_diagonal(adj, False)
        self.adjacency = adj
        self.forward_calls = 0

    def neighbors(self, i: int) -> list[int]:
        return [int(j) for j in np.flatnonzero(self.adjacency[i])]


@dataclass
class Messages:
    """``levels[l][i]`` is agent i's level-l action; ``noises[l-1][i]`` the noise that drew it."""

    levels: list[list] = field(default_factory=list)
    noises: list[list[np.ndarray]] = field(default_factory=list)

    def top(self) -> list:
        return self.levels[-1]


def level0_actions(policies, s: np.ndarray, rng: np.random.Generator):
    """Sample every agent's level-0 action from its own policy (no gradient).

    Returns ``(actions, log_probs, noises)`` as lists of arrays.
    """
    tape = Tape(record=False)
    actions, log_probs, noises = [], [], []
    for p in policies:
        eps = rng.standard_normal((s.shape[0], p.action_dim))
        a, lp = p.sample(tape, s, eps)
        actions.append(a.value)
        log_probs.append(lp.value)
        noises.append(eps)
    return actions, log_probs, noises


def message_pass(
    graph: ReasoningGraph,
    actors: Sequence,
    s,
    level0: Sequence,
    k: int,
    rng: np.random.Generator | None = None,
    noises: Sequence[Sequence[np.ndarray]] | None = None,
    tape: Tape | None = None,
) -> Messages:
    """Raise every agent's action from level 0 to level k.

    At each level, each central actor is evaluated once on the concatenation
    of its neighbours' previous-level actions (ascending agent index), so one
    pass costs exactly ``n`` central-actor evaluations per level.

    Noise for the sampled messages comes from ``rng`` unless ``noises`` is
    given, in which case the recorded draws are replayed. With a recording
    ``tape`` the result is differentiable with respect to any tensor in
    ``level0`` while the central actors themselves stay frozen.
    """
    if k < 0:
        raise ValueError("k must be >= 0")
    tape = tape if tape is not None else Tape(record=False)
    s_t = s if isinstance(s, Tensor) else Tensor(s)
    msgs = Messages(levels=[list(level0)])
    for level in range(k):
        prev = msgs.levels[-1]
        nxt, eps_level = [], []
        for i, actor in enumerate(actors):
            if noises is not None:
                eps = noises[level][i]
            else:
                eps = rng.standard_normal((s_t.shape[0], actor.action_dim))
            inputs = [prev[j] for j in graph.neighbors(i)]
            a, _ = actor.act(tape, s_t, inputs, eps, frozen=True)
            graph.forward_calls += 1
            nxt.append(a if tape.record else a.value)
            eps_level.append(eps)
        msgs.levels.append(nxt)
        msgs.noises.append(eps_level)
    return msgs
