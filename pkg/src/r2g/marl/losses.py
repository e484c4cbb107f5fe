"""Per-agent objectives.

Each function records onto the given tape and returns a scalar loss tensor.
Only the component being optimised contributes trainable tensors; every
other network is evaluated through its frozen parameter views.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from ..diffcore import Tape, Tensor
from .graph import ReasoningGraph, message_pass


def _others(joint: Sequence, i: int) -> list:
    return [a for j, a in enumerate(joint) if j != i]


def central_actor_loss(tape: Tape, bundle, s: np.ndarray, neighbor_actions: Sequence[np.ndarray],
                       opponent_actions: Sequence[np.ndarray], noise: np.ndarray) -> Tensor:
    """Mean of ``-Q_i(s, a_c, a_-i)`` with ``a_c`` drawn from the central actor given replayed ``a_-i``.

    No entropy term. ``neighbor_actions`` feed the central actor;
    ``opponent_actions`` (all other agents, index order) feed the critic.
    """
    a_c, _ = bundle.central_actor.act(tape, s, neighbor_actions, noise)
    q = bundle.critic.value(tape, s, a_c, opponent_actions, frozen=True)
    return tape.negate(tape.mean(q))


def policy_loss(
    tape: Tape,
    bundle,
    s: np.ndarray,
    noise: np.ndarray,
    opponent_actions: Sequence | None = None,
    mode: str = "detached",
    graph: ReasoningGraph | None = None,
    actors: Sequence | None = None,
    level0: Sequence[np.ndarray] | None = None,
    level_noises: Sequence[Sequence[np.ndarray]] | None = None,
    k: int = 0,
):
    """Soft policy loss ``mean(alpha * log pi(a0|s) - Q_i(s, a0, a_-i^(k)))``.

    ``noise`` must be the draw that produced this agent's level-0 action in
    the graph, so that the opponents' recursive actions respond to the very
    action being scored.

    ``detached``: ``opponent_actions`` are constants (level-k actions
    precomputed for the batch). ``flow_through``: the graph is replayed on
    the tape from ``level0`` and ``level_noises`` with this agent's level-0
    action live, so the gradient also flows through the opponents' responses.

    Returns ``(loss, log_prob)``.
    """
    i = bundle.index
    a0, logp = bundle.policy.sample(tape, s, noise)
    if mode == "detached":
        opp = list(opponent_actions)
    elif mode == "flow_through":
        seed = list(level0)
        seed[i] = a0
        msgs = message_pass(graph, actors, s, seed, k, noises=level_noises, tape=tape)
        opp = _others(msgs.top(), i)
    else:
        raise ValueError(f"unknown grad mode {mode!r}")
    q = bundle.critic.value(tape, s, a0, opp, frozen=True)
    entropy_term = tape.mul_const(logp, bundle.alpha)
    return tape.mean(tape.sub(entropy_term, q)), logp


def critic_target(bundle, r: np.ndarray, terminal: np.ndarray, gamma: float, s_next: np.ndarray,
                  a0_next: np.ndarray, logp_next: np.ndarray, opponents_next: Sequence[np.ndarray]) -> np.ndarray:
    """``r + gamma * (1 - terminal) * (Q_target(s', a0', a'_-i^(k)) - alpha * log pi(a0'|s'))``, shape [B, 1]."""
    r = np.asarray(r, dtype=np.float64).reshape(-1, 1)
    alive = 1.0 - np.asarray(terminal, dtype=np.float64).reshape(-1, 1)
    if not alive.any():
        return r.copy()
    q = bundle.target_critic.value(Tape(record=False), s_next, a0_next, opponents_next).value
    v = q - bundle.alpha * logp_next
    return r + gamma * alive * v


def critic_loss(tape: Tape, bundle, s: np.ndarray, a_i: np.ndarray, a_minus_i: Sequence[np.ndarray],
                targets: np.ndarray) -> Tensor:
    """Mean squared soft Bellman residual."""
    q = bundle.critic.value(tape, s, a_i, a_minus_i)
    return tape.mean(tape.square(tape.sub(q, Tensor(targets))))


def temperature_loss(tape: Tape, bundle, log_probs: np.ndarray) -> Tensor:
    """``mean(-exp(log_alpha) * (log pi + target_entropy))``; differentiable in ``log_alpha`` only."""
    slack = Tensor(np.asarray(log_probs, dtype=np.float64) + bundle.target_entropy)
    alpha = tape.exp(bundle.log_alpha)
    return tape.negate(tape.mean(tape.scale(slack, alpha)))


def deterministic_policy_loss(tape: Tape, agent, s: np.ndarray, opponent_actions: Sequence[np.ndarray]) -> Tensor:
    """MADDPG actor loss ``-mean Q_i(s, mu_i(s), a_-i)`` with ``a_-i`` from the replay batch."""
    a = agent.policy.forward(tape, Tensor(s))
    q = agent.critic.value(tape, s, a, opponent_actions, frozen=True)
    return tape.negate(tape.mean(q))
