from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..diffcore import AdamState, Tensor
from ..nets import (
    CentralActor,
    CentralCritic,
    MlpParams,
    SquashedGaussianPolicy,
    load_checkpoint,
    save_checkpoint,
)


def _adam(params, lr: float) -> AdamState:
    return AdamState.for_params([params.flat], lr=lr)


@dataclass
class AgentBundle:
    """Learnable pieces of one SAC-family agent."""

    index: int
    policy: SquashedGaussianPolicy
    critic: CentralCritic
    target_critic: CentralCritic
    central_actor: CentralActor | None
    log_alpha: Tensor
    target_entropy: float
    opt_policy: AdamState
    opt_critic: AdamState
    opt_central: AdamState | None
    opt_alpha: AdamState

    @property
    def alpha(self) -> float:
        return float(np.exp(self.log_alpha.value[0]))

    def state_arrays(self) -> dict[str, np.ndarray]:
        out = {
            "policy": self.policy.params.flat.value,
            "critic": self.critic.params.flat.value,
            "target_critic": self.target_critic.params.flat.value,
            "log_alpha": self.log_alpha.value,
        }
        if self.central_actor is not None:
            out["central_actor"] = self.central_actor.params.flat.value
        return out


@dataclass
class DeterministicAgent:
    """MADDPG agent: tanh-output policy, central critic, and target copies of both."""

    index: int
    policy: MlpParams
    target_policy: MlpParams
    critic: CentralCritic
    target_critic: CentralCritic
    opt_policy: AdamState
    opt_critic: AdamState

    def most_likely(self, s) -> np.ndarray:
        return self.policy(s)

    def state_arrays(self) -> dict[str, np.ndarray]:
        return {
            "policy": self.policy.params.flat.value,
            "target_policy": self.target_policy.params.flat.value,
            "critic": self.critic.params.flat.value,
            "target_critic": self.target_critic.params.flat.value,
        }


def build_sac_agents(spec, cfg, rng: np.random.Generator, central: bool, independent: bool = False,
                     graph=None) -> list[AgentBundle]:
    """Construct bundles. Central actors are drawn last so ``k=0`` runs share init with MASAC."""
    n = spec.n_agents
    dims = list(spec.action_dims)
    agents = []
    for i in range(n):
        policy = SquashedGaussianPolicy(spec.state_dim, dims[i], cfg.hidden, cfg.activation, rng)
        critic_dims = [dims[i]] if independent else [dims[i]] + [dims[j] for j in range(n) if j != i]
        critic = CentralCritic(spec.state_dim, critic_dims, cfg.hidden, cfg.activation, rng)
        target = critic.clone()
        log_alpha = Tensor(np.zeros(1), requires_grad=True)
        h = -float(dims[i]) if cfg.target_entropy is None else float(cfg.target_entropy)
        agents.append(
            AgentBundle(
                index=i,
                policy=policy,
                critic=critic,
                target_critic=target,
                central_actor=None,
                log_alpha=log_alpha,
                target_entropy=h,
                opt_policy=_adam(policy.params, cfg.policy_lr),
                opt_critic=_adam(critic.params, cfg.critic_lr),
                opt_central=None,
                opt_alpha=AdamState.for_params([log_alpha], lr=cfg.alpha_lr),
            )
        )
    if central:
        for i, ag in enumerate(agents):
            nbrs = graph.neighbors(i) if graph is not None else [j for j in range(n) if j != i]
            ca = CentralActor(spec.state_dim, dims[i], [dims[j] for j in nbrs], cfg.hidden, cfg.activation, rng)
            ag.central_actor = ca
            ag.opt_central = _adam(ca.params, cfg.central_actor_lr)
    return agents


def build_maddpg_agents(spec, cfg, rng: np.random.Generator) -> list[DeterministicAgent]:
    n = spec.n_agents
    dims = list(spec.action_dims)
    agents = []
    for i in range(n):
        policy = MlpParams([spec.state_dim, *cfg.hidden, dims[i]], cfg.activation, rng,
                           output_init=3e-3, output_activation="tanh")
        critic = CentralCritic(spec.state_dim, [dims[i]] + [dims[j] for j in range(n) if j != i],
                               cfg.hidden, cfg.activation, rng)
        agents.append(
            DeterministicAgent(
                index=i,
                policy=policy,
                target_policy=policy.clone(),
                critic=critic,
                target_critic=critic.clone(),
                opt_policy=_adam(policy.params, cfg.policy_lr),
                opt_critic=_adam(critic.params, cfg.critic_lr),
            )
        )
    return agents


def save_agents(directory: str | Path, agents, meta: dict) -> list[Path]:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = []
    for ag in agents:
        path = directory / f"agent{ag.index}.npz"
        save_checkpoint(path, ag.state_arrays(), {**meta, "agent": ag.index})
        paths.append(path)
    return paths


def load_agent_arrays(agent, path: str | Path) -> dict:
    """Load a checkpoint written by :func:`save_agents` into ``agent`` in place."""
    arrays, meta = load_checkpoint(path)
    for name, value in agent.state_arrays().items():
        if name not in arrays:
            raise ValueError(f"{path}: missing array {name!r}")
        if arrays[name].shape != value.shape:
            raise ValueError(f"{path}: {name} has shape {arrays[name].shape}, expected {value.shape}")
        value[...] = arrays[name]
    return meta
