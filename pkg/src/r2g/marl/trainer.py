"""Training loops for R2G (with MASAC as k=0), independent SAC, and MADDPG.

One epoch = ``steps_per_epoch`` exploration steps followed by
``iterations_per_epoch`` gradient iterations. Within an iteration, each
agent is updated in the order policy (and temperature), central actor,
critic, target network.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..diffcore import Tape, Tensor, adam_step
from ..envs import MarkovGame
from ..nets import soft_update
from ..replay import ReplayBuffer, Transition
from ..seeding import seed_everything
from .agents import build_maddpg_agents, build_sac_agents
from .config import TrainerConfig
from .graph import ReasoningGraph, level0_actions, message_pass
from .losses import (
    _others,
    central_actor_loss,
    critic_loss,
    critic_target,
    deterministic_policy_loss,
    policy_loss,
    temperature_loss,
)
from .noise import OUNoise


@dataclass
class EpochMetrics:
    epoch: int
    returns: list[float]
    most_likely: list[np.ndarray]
    losses: dict[str, list[float]] = field(default_factory=dict)
    alpha: list[float] = field(default_factory=list)


def _step(opt, params, tape: Tape, loss: Tensor) -> float:
    params.zero_grad()
    tape.backward(loss)
    adam_step([params.flat], opt)
    return loss.item()


class _Base:
    def __init__(self, env: MarkovGame, cfg: TrainerConfig):
        self.env = env
        self.cfg = cfg
        self.spec = env.spec
        self.n = env.spec.n_agents
        self.streams = seed_everything(cfg.seed)
        self.buffer = ReplayBuffer(self.spec.state_dim, self.spec.action_dims, cfg.buffer_capacity)
        self.epoch = 0
        self._state = None
        self._ep_len = 0
        self._ep_return = np.zeros(self.n)
        self.agents: list = []

    # -- exploration -----------------------------------------------------------------

    def _begin_episode(self):
        self._state = self.env.reset(int(self.streams.explore.integers(2**31)))
        self._ep_len = 0
        self._ep_return = np.zeros(self.n)

    def explore(self, steps: int) -> list[np.ndarray]:
        """Run ``steps`` environment steps, pushing transitions; returns finished-episode returns."""
        finished = []
        for _ in range(steps):
            if self._state is None:
                self._begin_episode()
            actions = self.exploration_actions(self._state)
            res = self.env.step(self._state, actions)
            self._ep_len += 1
            done = res.terminal or self._ep_len >= self.spec.max_episode_length
            self.buffer.push(Transition(self._state, actions, res.rewards, res.next_state, res.terminal))
            self._ep_return += res.rewards
            self._state = res.next_state
            if done:
                finished.append(self._ep_return.copy())
                self._state = None
        return finished

    def exploration_actions(self, state) -> list[np.ndarray]:
        raise NotImplementedError

    def most_likely(self, state) -> list[np.ndarray]:
        raise NotImplementedError

    def train_iteration(self) -> dict[str, list[float]]:
        raise NotImplementedError

    # -- epochs ----------------------------------------------------------------------

    def train_epoch(self) -> EpochMetrics:
        if self.epoch == 0 and self.cfg.warmup_steps > 0 and len(self.buffer) == 0:
            self.explore(self.cfg.warmup_steps)
        finished = self.explore(self.cfg.steps_per_epoch)
        sums: dict[str, np.ndarray] = {}
        iters = self.cfg.iterations_per_epoch
        for _ in range(iters):
            for key, vals in self.train_iteration().items():
                sums[key] = sums.get(key, 0.0) + np.asarray(vals)
        self.epoch += 1
        rets = np.mean(finished, axis=0) if finished else np.full(self.n, np.nan)
        s0 = self.env.reset(0)
        return EpochMetrics(
            epoch=self.epoch,
            returns=[float(x) for x in rets],
            most_likely=[np.asarray(a).reshape(-1) for a in self.most_likely(s0)],
            losses={k: [float(x) for x in v / iters] for k, v in sums.items()},
            alpha=self.alphas(),
        )

    def alphas(self) -> list[float]:
        return []

    def train(self, epochs: int | None = None, callback=None) -> list[EpochMetrics]:
        history = []
        for _ in range(self.cfg.epochs if epochs is None else epochs):
            m = self.train_epoch()
            history.append(m)
            if callback is not None:
                callback(m)
        return history


class SoftTrainer(_Base):
    """R2G (``k >= 1``), MASAC (``k = 0``) and independent SAC."""

    def __init__(self, env: MarkovGame, cfg: TrainerConfig, adjacency=None):
        super().__init__(env, cfg)
        self.independent = cfg.algo == "sac"
        self.k = 0 if self.independent else cfg.k
        self.graph = ReasoningGraph(self.n, adjacency)
        self.agents = build_sac_agents(
            self.spec, cfg, self.streams.init, central=self.k > 0,
            independent=self.independent, graph=self.graph,
        )

    @property
    def policies(self):
        return [a.policy for a in self.agents]

    @property
    def central_actors(self):
        return [a.central_actor for a in self.agents]

    def alphas(self) -> list[float]:
        return [a.alpha for a in self.agents]

    def exploration_actions(self, state):
        s = np.asarray(state, dtype=np.float64).reshape(1, -1)
        acts, _, _ = level0_actions(self.policies, s, self.streams.explore)
        return [a[0] for a in acts]

    def most_likely(self, state):
        s = np.asarray(state, dtype=np.float64).reshape(1, -1)
        return [p.most_likely(s)[0] for p in self.policies]

    def recursive_actions(self, s: np.ndarray):
        """Level-0 samples and level-k messages for a state batch."""
        rng = self.streams.noise
        a0, logp0, eps0 = level0_actions(self.policies, s, rng)
        msgs = message_pass(self.graph, self.central_actors, s, a0, self.k, rng=rng)
        return a0, logp0, eps0, msgs

    def _critic_opponents(self, joint, i):
        return [] if self.independent else _others(joint, i)

    def train_iteration(self):
        cfg = self.cfg
        rng = self.streams.noise
        batch = self.buffer.sample_batch(cfg.batch_size, self.streams.batch)
        s = batch.s
        a0, _, eps0, msgs = self.recursive_actions(s)
        bootstrap = not bool(np.all(batch.terminal))
        if bootstrap:
            a0n, logp0n, _, msgs_n = self.recursive_actions(batch.s_next)

        out = {"policy": [], "alpha": [], "central_actor": [], "critic": []}
        for ag in self.agents:
            i = ag.index
            # policy
            tape = Tape()
            if self.independent:
                loss, logp = policy_loss(tape, ag, s, eps0[i], opponent_actions=[])
            else:
                loss, logp = policy_loss(
                    tape, ag, s, eps0[i],
                    opponent_actions=_others(msgs.top(), i),
                    mode=cfg.grad_mode, graph=self.graph, actors=self.central_actors,
                    level0=a0, level_noises=msgs.noises, k=self.k,
                )
            out["policy"].append(_step(ag.opt_policy, ag.policy.params, tape, loss))

            # temperature
            tape = Tape()
            ag.log_alpha.zero_grad()
            a_loss = temperature_loss(tape, ag, logp.value)
            tape.backward(a_loss)
            adam_step([ag.log_alpha], ag.opt_alpha)
            out["alpha"].append(a_loss.item())

            # central actor
            if ag.central_actor is not None:
                tape = Tape()
                nbr = [batch.a[j] for j in self.graph.neighbors(i)]
                noise = rng.standard_normal((len(batch), ag.central_actor.action_dim))
                c_loss = central_actor_loss(tape, ag, s, nbr, _others(batch.a, i), noise)
                out["central_actor"].append(_step(ag.opt_central, ag.central_actor.params, tape, c_loss))

            # critic
            if bootstrap:
                target = critic_target(
                    ag, batch.r[:, i], batch.terminal, cfg.gamma, batch.s_next,
                    a0n[i], logp0n[i], self._critic_opponents(msgs_n.top(), i),
                )
            else:
                target = batch.r[:, i : i + 1].copy()
            tape = Tape()
            q_loss = critic_loss(tape, ag, s, batch.a[i], self._critic_opponents(batch.a, i), target)
            out["critic"].append(_step(ag.opt_critic, ag.critic.params, tape, q_loss))

            soft_update(ag.target_critic, ag.critic, cfg.tau)
        if not out["central_actor"]:
            del out["central_actor"]
        return out


class MaddpgTrainer(_Base):
    """Deterministic policies, replayed opponent actions, OU exploration noise."""

    def __init__(self, env: MarkovGame, cfg: TrainerConfig):
        super().__init__(env, cfg)
        self.agents = build_maddpg_agents(self.spec, cfg, self.streams.init)
        self.noise = [OUNoise(d, cfg.ou_theta, cfg.ou_mu, cfg.ou_sigma) for d in self.spec.action_dims]

    def _begin_episode(self):
        super()._begin_episode()
        for proc in self.noise:
            proc.reset()

    def exploration_actions(self, state):
        s = np.asarray(state, dtype=np.float64).reshape(1, -1)
        return [
            np.clip(ag.policy(s)[0] + proc.sample(self.streams.explore), -1.0, 1.0)
            for ag, proc in zip(self.agents, self.noise)
        ]

    def most_likely(self, state):
        s = np.asarray(state, dtype=np.float64).reshape(1, -1)
        return [ag.policy(s)[0] for ag in self.agents]

    def train_iteration(self):
        cfg = self.cfg
        batch = self.buffer.sample_batch(cfg.batch_size, self.streams.batch)
        s = batch.s
        bootstrap = not bool(np.all(batch.terminal))
        if bootstrap:
            next_actions = [ag.target_policy(batch.s_next) for ag in self.agents]
        out = {"policy": [], "critic": []}
        for ag in self.agents:
            i = ag.index
            tape = Tape()
            p_loss = deterministic_policy_loss(tape, ag, s, _others(batch.a, i))
            out["policy"].append(_step(ag.opt_policy, ag.policy.params, tape, p_loss))

            target = batch.r[:, i : i + 1].copy()
            if bootstrap:
                q = ag.target_critic.value(Tape(record=False), batch.s_next, next_actions[i],
                                           _others(next_actions, i)).value
                alive = 1.0 - batch.terminal.astype(np.float64).reshape(-1, 1)
                target = target + cfg.gamma * alive * q
            tape = Tape()
            q_loss = critic_loss(tape, ag, s, batch.a[i], _others(batch.a, i), target)
            out["critic"].append(_step(ag.opt_critic, ag.critic.params, tape, q_loss))

            soft_update(ag.target_critic, ag.critic, cfg.tau)
            soft_update(ag.target_policy, ag.policy, cfg.tau)
        return out


def make_trainer(env: MarkovGame, cfg: TrainerConfig, adjacency=None):
    if cfg.algo == "maddpg":
        return MaddpgTrainer(env, cfg)
    return SoftTrainer(env, cfg, adjacency)
