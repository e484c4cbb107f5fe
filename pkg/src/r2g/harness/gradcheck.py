"""Randomised small instances of every training loss, for finite-difference checks.

Each builder takes a generator and returns ``(loss_fn, params)`` in the
form :func:`r2g.diffcore.grad_check` expects. Instances use tanh hidden
units so the loss is smooth everywhere the central differences probe it.
"""

from __future__ import annotations

from typing import Callable

import numpy as np

from ..diffcore import grad_check
from ..envs import GameSpec
from ..marl.agents import build_maddpg_agents, build_sac_agents
from ..marl.config import TrainerConfig
from ..marl.graph import ReasoningGraph, level0_actions, message_pass
from ..marl.losses import (
    _others,
    central_actor_loss,
    critic_loss,
    deterministic_policy_loss,
    policy_loss,
    temperature_loss,
)

BATCH = 4
GRAD_TOL = 1e-4


def _setup(rng: np.random.Generator, k: int = 1, n: int = 2):
    dims = tuple(int(d) for d in rng.integers(1, 3, size=n))
    spec = GameSpec(n_agents=n, state_dim=3, action_dims=dims)
    cfg = TrainerConfig(algo="r2g", k=k, hidden=(5, 4), activation="tanh")
    graph = ReasoningGraph(n)
    agents = build_sac_agents(spec, cfg, rng, central=True, graph=graph)
    for ag in agents:
        ag.log_alpha.value[...] = rng.uniform(-2.0, 0.5)
    s = rng.standard_normal((BATCH, spec.state_dim))
    joint = [rng.uniform(-0.9, 0.9, (BATCH, d)) for d in dims]
    return spec, graph, agents, s, joint


def critic_instance(rng):
    _, _, agents, s, joint = _setup(rng)
    ag = agents[int(rng.integers(len(agents)))]
    targets = rng.standard_normal((BATCH, 1)) * 3.0
    i = ag.index
    return (lambda tape: critic_loss(tape, ag, s, joint[i], _others(joint, i), targets)), [ag.critic.params.flat]


def central_actor_instance(rng):
    _, graph, agents, s, joint = _setup(rng)
    ag = agents[int(rng.integers(len(agents)))]
    i = ag.index
    noise = rng.standard_normal((BATCH, ag.central_actor.action_dim))
    nbr = [joint[j] for j in graph.neighbors(i)]
    return (lambda tape: central_actor_loss(tape, ag, s, nbr, _others(joint, i), noise)), [ag.central_actor.params.flat]


def _policy_instance(rng, mode: str):
    k = int(rng.integers(1, 3))
    _, graph, agents, s, _ = _setup(rng, k=k)
    a0, _, eps0 = level0_actions([a.policy for a in agents], s, rng)
    msgs = message_pass(graph, [a.central_actor for a in agents], s, a0, k, rng=rng)
    ag = agents[int(rng.integers(len(agents)))]
    i = ag.index

    def loss_fn(tape):
        loss, _ = policy_loss(tape, ag, s, eps0[i], opponent_actions=_others(msgs.top(), i), mode=mode,
                              graph=graph, actors=[a.central_actor for a in agents], level0=a0,
                              level_noises=msgs.noises, k=k)
        return loss

    return loss_fn, [ag.policy.params.flat]


def policy_detached_instance(rng):
    return _policy_instance(rng, "detached")


def policy_flow_through_instance(rng):
    return _policy_instance(rng, "flow_through")


def temperature_instance(rng):
    _, _, agents, _, _ = _setup(rng)
    ag = agents[0]
    logp = rng.standard_normal((BATCH, 1))
    return (lambda tape: temperature_loss(tape, ag, logp)), [ag.log_alpha]


def maddpg_policy_instance(rng):
    spec = GameSpec(n_agents=2, state_dim=3, action_dims=(1, 2))
    cfg = TrainerConfig(algo="maddpg", hidden=(5, 4), activation="tanh")
    agents = build_maddpg_agents(spec, cfg, rng)
    s = rng.standard_normal((BATCH, 3))
    opp = [rng.uniform(-0.9, 0.9, (BATCH, 2))]
    return (lambda tape: deterministic_policy_loss(tape, agents[0], s, opp)), [agents[0].policy.params.flat]


LOSS_INSTANCES: dict[str, Callable] = {
    "critic": critic_instance,
    "central_actor": central_actor_instance,
    "policy_detached": policy_detached_instance,
    "policy_flow_through": policy_flow_through_instance,
    "temperature": temperature_instance,
    "maddpg_policy": maddpg_policy_instance,
}


def check_all_losses(trials: int = 100, seed: int = 0) -> dict[str, float]:
    """Worst relative error per loss over ``trials`` random instances each."""
    return {name: grad_check(build, trials=trials, rng=np.random.default_rng([seed, j]))
            for j, (name, build) in enumerate(LOSS_INSTANCES.items())}
