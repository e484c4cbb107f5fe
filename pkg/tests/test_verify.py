from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from r2g.envs import reward_zero_sum
from r2g.nets import CentralActor
from r2g.verify import (
    GridSpec,
    TabularCooperativeGame,
    TrajectoryLog,
    brute_force_best_response,
    contraction_check,
    contraction_ratio,
    convergence_error,
    format_float,
    oscillation_score,
    read_response_map,
    response_agreement,
    response_map,
    reward_value_fn,
    sign_agreement,
    write_metrics,
    write_response_map,
)

S = np.ones(2)


def test_grid_spec_validation():
    g = GridSpec(41)
    assert 0.0 in g.points() and g.step == pytest.approx(0.05)
    for bad in (2, 4, 40):
        with pytest.raises(ValueError):
            GridSpec(bad)


def test_zero_sum_best_responses():
    grid = GridSpec(41)
    assert brute_force_best_response(reward_value_fn(reward_zero_sum, 0), S, [np.array([[0.8]])], grid) == 1.0
    assert brute_force_best_response(reward_value_fn(reward_zero_sum, 1), S, [np.array([[0.3]])], grid) == -1.0


def test_ties_break_toward_smallest_action():
    flat = lambda s, a, o: np.zeros(len(a))
    assert brute_force_best_response(flat, S, [np.zeros((1, 1))], GridSpec(11)) == -1.0


@given(st.floats(0.01, 100.0), st.floats(-50, 50), st.floats(-1, 1))
def test_best_response_invariant_to_positive_affine_maps(scale, shift, centre):
    base = lambda s, a, o: -(a[:, 0] - centre) ** 2
    moved = lambda s, a, o: scale * base(s, a, o) + shift
    grid = GridSpec(21)
    assert brute_force_best_response(base, S, [], grid) == brute_force_best_response(moved, S, [], grid)


def test_untrained_response_map_is_near_zero(tmp_path):
    ca = CentralActor(2, 1, [1], seed=0)
    rows = response_map(ca, S, GridSpec(41), agent_id=1)
    assert len(rows) == 41 and all(r[1] == 1 for r in rows)
    assert max(abs(r[2]) for r in rows) < 0.05
    write_response_map(tmp_path / "rm.csv", rows)
    assert read_response_map(tmp_path / "rm.csv") == rows
    assert (tmp_path / "rm.csv").read_text().splitlines()[0] == "opponent_action,agent_id,response"


def test_agreement_helpers():
    grid = GridSpec(5)
    rows = [(o, 0, np.sign(o)) for o in grid.points()]
    assert sign_agreement(rows, np.sign) == 1.0
    assert sign_agreement(rows, lambda o: -np.sign(o)) == 0.0
    shifted = [(o, 0, r + 0.3) for o, _, r in rows]
    assert response_agreement(rows, shifted, grid) == 1.0  # 0.3 <= 0.1 + one 0.5-wide cell
    assert response_agreement(rows, [(o, 0, r + 0.7) for o, _, r in rows], grid) == 0.0


def test_oscillation_score_examples():
    assert oscillation_score(TrajectoryLog.from_rows(np.zeros(600)), window=500) == 0
    t = np.arange(1000)
    square = np.where((t // 50) % 2 == 0, 1.0, -1.0)  # period 100
    assert oscillation_score(TrajectoryLog.from_rows(square), window=500) >= 9
    ramp = np.linspace(-1, 1, 500)
    assert oscillation_score(TrajectoryLog.from_rows(ramp), window=500) == 1
    with pytest.raises(ValueError):
        oscillation_score(TrajectoryLog.from_rows(ramp), window=501)


@given(st.lists(st.floats(-1, 1), min_size=1, max_size=60))
def test_oscillation_score_bounded_by_sign_changes(xs):
    log = TrajectoryLog.from_rows(xs)
    score = oscillation_score(log, window=len(xs))
    assert 0 <= score <= max(0, len(xs) - 1)


def test_convergence_error_examples():
    target = [0.5, 0.5]
    log = TrajectoryLog.from_rows(np.tile(target, (20, 1)))
    assert convergence_error(log, target, 10) == 0.0
    log = TrajectoryLog.from_rows(np.tile([0.7, 0.3], (20, 1)))
    assert convergence_error(log, target, 10) == pytest.approx(0.2)
    with pytest.raises(ValueError):
        convergence_error(log, target, 21)


def test_trajectory_log_requires_increasing_iterations():
    with pytest.raises(ValueError):
        TrajectoryLog(np.array([1, 1]), np.zeros((2, 2)))


def test_trajectory_log_reads_csv(tmp_path):
    p = tmp_path / "trajectory.csv"
    p.write_text("epoch,agent_id,action_dim,most_likely_action\n1,0,0,0.25\n1,1,0,-0.5\n2,0,0,0.5\n2,1,0,-1\n")
    log = TrajectoryLog.from_csv(p)
    np.testing.assert_array_equal(log.iterations, [1, 2])
    np.testing.assert_array_equal(log.actions, [[0.25, -0.5], [0.5, -1.0]])


def test_contraction_examples():
    game = TabularCooperativeGame.random(0, states=5, actions=7)
    assert contraction_check(game, 0.0, trials=10) == 0.0
    assert contraction_check(game, 0.99, trials=100) <= 0.99 + 1e-9
    assert contraction_check(game, 0.99, trials=20, shift=True) == pytest.approx(0.99, abs=1e-12)
    q = np.zeros(game.shape)
    with pytest.raises(ValueError):
        contraction_ratio(game, q, q, 0.99)


@given(st.integers(0, 10_000), st.floats(0.0, 0.999))
def test_contraction_never_exceeds_gamma(seed, gamma):
    game = TabularCooperativeGame.random(seed, states=3, actions=4, alpha=0.5)
    assert contraction_check(game, gamma, trials=10, rng=seed) <= gamma + 1e-9


def test_operator_matches_explicit_loops():
    game = TabularCooperativeGame.random(3, states=2, actions=3, alpha=0.2)
    q = np.random.default_rng(0).standard_normal(game.shape)
    out = game.operator(q, 0.9)
    S_, A, _ = game.shape
    for s in range(S_):
        for a1 in range(A):
            for a2 in range(A):
                v = 0.0
                for t in range(S_):
                    inner = sum(game.policy[t, b] * (q[t, b].max() - 0.2 * np.log(game.policy[t, b]))
                                for b in range(A))
                    v += game.transition[s, a1, a2, t] * inner
                assert out[s, a1, a2] == pytest.approx(game.reward[s, a1, a2] + 0.9 * v, rel=1e-12)


@given(st.floats(allow_nan=False, allow_infinity=False, width=64))
def test_float_format_round_trips(x):
    assert float(format_float(x)) == x


def test_metrics_csv(tmp_path):
    p = tmp_path / "metrics.csv"
    write_metrics(p, [("r", "m", 0.1)])
    write_metrics(p, [("r", "n", 2.0)], append=True)
    assert p.read_text() == "run_id,metric,value\nr,m,0.10000000000000001\nr,n,2\n"


@pytest.mark.parametrize("seed", [0, 1])
def test_converged_central_actor_agrees_with_critic_argmax(seed):
    from types import SimpleNamespace

    from r2g.diffcore import AdamState, Tape, adam_step
    from r2g.marl.losses import central_actor_loss
    from r2g.nets import CentralCritic
    from r2g.verify import oracle_responses

    rng = np.random.default_rng(seed)
    critic = CentralCritic(2, [1, 1], hidden=(16, 16), seed=rng)
    critic.params.flat.value[-17:] *= 20.0  # output layer: give the landscape real relief
    actor = CentralActor(2, 1, [1], hidden=(16, 16), activation="relu", seed=rng)
    opt = AdamState.for_params([actor.params.flat], lr=3e-3)
    bundle = SimpleNamespace(central_actor=actor, critic=critic)
    s = np.ones((128, 2))
    for _ in range(1500):
        opp = rng.uniform(-1, 1, (128, 1))
        tape = Tape()
        loss = central_actor_loss(tape, bundle, s, [opp], [opp], rng.standard_normal((128, 1)))
        actor.params.zero_grad()
        tape.backward(loss)
        adam_step([actor.params.flat], opt)
    grid = GridSpec(41)
    mine = response_map(actor, S, grid)
    assert response_agreement(mine, oracle_responses(critic, S, grid), grid) >= 0.9
