from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from r2g.diffcore import Tape
from r2g.envs import GameSpec, make_game
from r2g.marl import (
    OUNoise,
    ReasoningGraph,
    SoftTrainer,
    TrainerConfig,
    critic_target,
    level0_actions,
    make_trainer,
    message_pass,
    policy_loss,
    temperature_loss,
)
from r2g.marl.agents import build_sac_agents
from r2g.marl.losses import _others

SMALL = dict(hidden=(8, 8), batch_size=16, steps_per_epoch=10, warmup_steps=32)


def bundles(n=2, k=1, seed=0, dims=None):
    dims = dims or (1,) * n
    spec = GameSpec(n, 2, tuple(dims))
    cfg = TrainerConfig(k=k, hidden=(6, 6))
    graph = ReasoningGraph(n)
    return spec, graph, build_sac_agents(spec, cfg, np.random.default_rng(seed), central=True, graph=graph)


def test_masac_is_r2g_level_zero():
    assert TrainerConfig(algo="masac", k=3).k == 0
    with pytest.raises(ValueError):
        TrainerConfig(algo="nope")
    with pytest.raises(ValueError):
        TrainerConfig(k=-1)
    with pytest.raises(ValueError):
        TrainerConfig(grad_mode="sideways")


def test_config_dict_round_trip():
    cfg = TrainerConfig(algo="maddpg", hidden=(4, 5), target_entropy=-0.5, train_iters=7)
    assert TrainerConfig.from_dict(cfg.to_dict()) == cfg
    with pytest.raises(ValueError, match="unknown"):
        TrainerConfig.from_dict({"colour": 1})


def test_graph_default_is_fully_connected_without_self_loops():
    g = ReasoningGraph(4)
    assert g.neighbors(2) == [0, 1, 3]
    g = ReasoningGraph(3, adjacency=[[1, 1, 0], [1, 1, 1], [0, 1, 1]])
    assert g.neighbors(0) == [1] and g.neighbors(1) == [0, 2]
    with pytest.raises(ValueError):
        ReasoningGraph(3, adjacency=np.ones((2, 2)))


@pytest.mark.parametrize("n", [2, 3, 4])
@pytest.mark.parametrize("k", [0, 1, 2, 3])
def test_message_pass_costs_n_times_k(n, k):
    spec, graph, agents = bundles(n, k)
    s = np.ones((5, spec.state_dim))
    rng = np.random.default_rng(0)
    a0, _, _ = level0_actions([a.policy for a in agents], s, rng)
    msgs = message_pass(graph, [a.central_actor for a in agents], s, a0, k, rng=rng)
    assert graph.forward_calls == n * k
    assert len(msgs.levels) == k + 1 and len(msgs.noises) == k


def test_message_pass_replay_reproduces_messages():
    spec, graph, agents = bundles(3, 2)
    s = np.ones((4, 2))
    rng = np.random.default_rng(1)
    actors = [a.central_actor for a in agents]
    a0, _, _ = level0_actions([a.policy for a in agents], s, rng)
    first = message_pass(graph, actors, s, a0, 2, rng=rng)
    again = message_pass(graph, actors, s, a0, 2, noises=first.noises)
    for x, y in zip(first.top(), again.top()):
        np.testing.assert_array_equal(x, y)


def test_level_one_uses_neighbours_level_zero_actions():
    spec, graph, agents = bundles(2, 1)
    s = np.ones((3, 2))
    a0 = [np.full((3, 1), 0.4), np.full((3, 1), -0.7)]
    msgs = message_pass(graph, [a.central_actor for a in agents], s, a0, 1, rng=np.random.default_rng(0))
    eps = msgs.noises[0][0]
    want, _ = agents[0].central_actor.act(Tape(record=False), s, [a0[1]], eps)
    np.testing.assert_array_equal(msgs.levels[1][0], want.value)


def test_policy_loss_modes_agree_in_value_but_not_gradient():
    spec, graph, agents = bundles(2, 1, seed=3)
    for ag in agents:  # make responses depend visibly on the input action
        ag.central_actor.params.flat.value[:] *= 30.0
    s = np.ones((6, 2))
    rng = np.random.default_rng(2)
    actors = [a.central_actor for a in agents]
    a0, _, eps0 = level0_actions([a.policy for a in agents], s, rng)
    msgs = message_pass(graph, actors, s, a0, 1, rng=rng)
    ag = agents[0]
    grads, values = [], []
    for mode in ("detached", "flow_through"):
        ag.policy.params.zero_grad()
        tape = Tape()
        loss, logp = policy_loss(tape, ag, s, eps0[0], _others(msgs.top(), 0), mode=mode, graph=graph,
                                 actors=actors, level0=a0, level_noises=msgs.noises, k=1)
        tape.backward(loss)
        values.append(loss.item())
        grads.append(ag.policy.params.flat.grad.copy())
    assert values[0] == pytest.approx(values[1], rel=1e-12)
    assert not np.allclose(grads[0], grads[1])


def test_policy_loss_scores_the_level_zero_sample():
    spec, graph, agents = bundles(2, 1)
    s = np.ones((4, 2))
    a0, _, eps0 = level0_actions([a.policy for a in agents], s, np.random.default_rng(5))
    again, _ = agents[1].policy.sample(Tape(record=False), s, eps0[1])
    np.testing.assert_array_equal(again.value, a0[1])


def test_critic_target_formula():
    spec, graph, agents = bundles(2, 1)
    ag = agents[0]
    ag.log_alpha.value[0] = np.log(0.3)
    rng = np.random.default_rng(0)
    s2 = rng.standard_normal((5, 2))
    a0n, opp = rng.uniform(-1, 1, (5, 1)), [rng.uniform(-1, 1, (5, 1))]
    logp = rng.standard_normal((5, 1))
    r = rng.standard_normal(5)
    term = np.array([0, 1, 0, 1, 0], dtype=bool)
    q = ag.target_critic.value(Tape(record=False), s2, a0n, opp).value
    want = r.reshape(-1, 1) + 0.9 * (1 - term.reshape(-1, 1)) * (q - 0.3 * logp)
    np.testing.assert_allclose(critic_target(ag, r, term, 0.9, s2, a0n, logp, opp), want)
    np.testing.assert_array_equal(critic_target(ag, r, np.ones(5, bool), 0.9, s2, a0n, logp, opp),
                                  r.reshape(-1, 1))


@given(st.floats(-3, 3))
def test_temperature_gradient_pushes_entropy_toward_target(shift):
    spec, graph, agents = bundles(2, 1)
    ag = agents[0]
    logp = np.full((8, 1), -ag.target_entropy + shift)
    ag.log_alpha.zero_grad()
    tape = Tape()
    tape.backward(temperature_loss(tape, ag, logp))
    # log-prob above the target (too little entropy) must raise alpha, i.e. negative gradient
    assert np.sign(ag.log_alpha.grad[0]) == -np.sign(shift) or abs(shift) < 1e-12
    assert ag.log_alpha.grad[0] == pytest.approx(-ag.alpha * shift)


def test_ou_noise_reset_and_stationary_spread():
    ou = OUNoise(1, theta=0.15, mu=0.0, sigma=0.2)
    rng = np.random.default_rng(0)
    xs = np.array([ou.sample(rng)[0] for _ in range(200_000)])
    assert xs[1000:].std() == pytest.approx(0.2 / np.sqrt(2 * 0.15 - 0.15**2), rel=0.05)
    ou.reset()
    assert ou.state[0] == 0.0


@pytest.mark.parametrize("algo", ["r2g", "masac", "sac", "maddpg"])
def test_trainers_run_and_are_deterministic(algo):
    def history():
        tr = make_trainer(make_game("max_two"), TrainerConfig(algo=algo, seed=4, **SMALL))
        return [np.concatenate(m.most_likely) for m in tr.train(3)]

    a, b = history(), history()
    for x, y in zip(a, b):
        assert x.tobytes() == y.tobytes()


def test_masac_and_r2g_k0_follow_identical_paths():
    runs = []
    for algo, k in (("masac", 5), ("r2g", 0)):
        tr = make_trainer(make_game("zero_sum"), TrainerConfig(algo=algo, k=k, seed=2, **SMALL))
        runs.append([np.concatenate(m.most_likely).tobytes() for m in tr.train(3)])
    assert runs[0] == runs[1]


def test_warmup_fills_buffer_before_first_update():
    tr = make_trainer(make_game("zero_sum"), TrainerConfig(seed=0, **SMALL))
    tr.train_epoch()
    assert len(tr.buffer) == SMALL["warmup_steps"] + SMALL["steps_per_epoch"]


def test_training_batch_recursion_costs_n_times_k():
    for n in (2, 3):
        tr = make_trainer(make_game(f"coord{n}"), TrainerConfig(k=2, seed=0, **SMALL))
        assert isinstance(tr, SoftTrainer)
        tr.explore(40)
        before = tr.graph.forward_calls
        tr.train_iteration()
        assert tr.graph.forward_calls - before == n * 2


def test_independent_sac_critics_ignore_opponents():
    tr = make_trainer(make_game("zero_sum"), TrainerConfig(algo="sac", seed=0, **SMALL))
    assert tr.agents[0].critic.in_dim == 2 + 1 and tr.agents[0].central_actor is None


def test_maddpg_exploration_stays_in_box():
    tr = make_trainer(make_game("max_two"), TrainerConfig(algo="maddpg", ou_sigma=2.0, **SMALL))
    tr.explore(50)
    acts = np.array([tr.buffer.get(i).a[0][0] for i in range(len(tr.buffer))])
    assert np.all(np.abs(acts) <= 1.0) and np.any(np.abs(acts) == 1.0)
