from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate

from r2g.diffcore import ShapeError, Tape, Tensor
from r2g.nets import (
    HEAD_INIT,
    LOG_STD_MAX,
    LOG_STD_MIN,
    CentralActor,
    CentralCritic,
    MlpParams,
    SquashedGaussianPolicy,
    load_checkpoint,
    save_checkpoint,
    soft_update,
)


def squashed_density(a, mu, sigma, eps=1e-6):
    """Reference density of tanh(N(mu, sigma^2)) with the same epsilon regulariser."""
    u = np.arctanh(a)
    gauss = np.exp(-0.5 * ((u - mu) / sigma) ** 2) / (sigma * np.sqrt(2 * np.pi))
    return gauss / (1.0 - a * a + eps)


def policy_with_head(mu: float, log_std: float) -> SquashedGaussianPolicy:
    """One-dimensional policy whose heads output constants, via zeroed weights and biases."""
    p = SquashedGaussianPolicy(1, 1, hidden=(4,), seed=0)
    for t in p.params.tensors:
        t.value[...] = 0.0
    p.params.tensors[3].value[...] = mu
    p.params.tensors[5].value[...] = log_std
    return p


def test_density_integrates_to_one():
    rng = np.random.default_rng(0)
    for _ in range(20):
        mu = rng.uniform(-2.0, 2.0)
        log_std = rng.uniform(np.log(0.1), np.log(2.0))
        p = policy_with_head(mu, log_std)
        x = np.zeros((1, 1))
        dens = lambda a: float(np.exp(p.log_prob(x, np.array([[a]]))[0, 0]))
        total, _ = integrate.quad(dens, -1.0, 1.0, limit=400, points=[np.tanh(mu)])
        assert total == pytest.approx(1.0, abs=1e-2)


def test_sample_log_prob_matches_closed_form():
    rng = np.random.default_rng(1)
    p = policy_with_head(0.3, -0.4)
    x = np.zeros((6, 1))
    eps = rng.standard_normal((6, 1))
    a, logp = p.sample(Tape(record=False), x, eps)
    u = 0.3 + np.exp(-0.4) * eps
    np.testing.assert_allclose(a.value, np.tanh(u))
    np.testing.assert_allclose(np.exp(logp.value), squashed_density(np.tanh(u), 0.3, np.exp(-0.4)), rtol=1e-10)
    np.testing.assert_allclose(p.log_prob(x, a.value), logp.value, rtol=1e-8)


def test_most_likely_is_tanh_of_mean():
    p = policy_with_head(-0.8, 0.0)
    np.testing.assert_allclose(p.most_likely(np.zeros((2, 1))), np.tanh(-0.8))


def test_log_std_is_clamped():
    for raw, want in ((50.0, LOG_STD_MAX), (-50.0, LOG_STD_MIN)):
        _, ls = policy_with_head(0.0, raw).distribution(np.zeros((1, 1)))
        assert ls[0, 0] == want


def test_policy_heads_start_small():
    p = SquashedGaussianPolicy(3, 2, hidden=(16, 16), seed=5)
    for t in p.params.tensors[-4:]:
        assert np.all(np.abs(t.value) <= HEAD_INIT)
    mu, ls = p.distribution(np.random.default_rng(0).standard_normal((8, 3)))
    assert np.all(np.abs(mu) < 0.2) and np.all(np.abs(ls) < 0.2)


def test_hidden_init_bounds():
    mlp = MlpParams([5, 7, 1], seed=3)
    assert np.all(np.abs(mlp.params.tensors[0].value) <= 1 / np.sqrt(5))
    assert np.all(mlp.params.tensors[1].value == 0.0)


def test_policy_rejects_bad_shapes():
    p = SquashedGaussianPolicy(3, 2, seed=0)
    with pytest.raises(ShapeError):
        p.sample(Tape(), np.zeros((4, 2)), np.zeros((4, 2)))
    with pytest.raises(ShapeError):
        p.sample(Tape(), np.zeros((4, 3)), np.zeros((4, 1)))


def test_critic_checks_input_width():
    q = CentralCritic(2, [1, 1], seed=0)
    assert q.value(Tape(record=False), np.ones((3, 2)), np.zeros((3, 1)), [np.zeros((3, 1))]).shape == (3, 1)
    with pytest.raises(ShapeError):
        q.value(Tape(), np.ones((3, 2)), np.zeros((3, 1)), [np.zeros((3, 2))])


def test_central_actor_consumes_opponent_actions():
    ca = CentralActor(2, 1, [1], seed=0)
    s = np.ones((5, 2))
    a = ca.most_likely(s, [np.linspace(-1, 1, 5).reshape(-1, 1)])
    assert a.shape == (5, 1) and np.all(np.abs(a) < 1)


@given(st.floats(0.0, 1.0))
def test_soft_update_is_convex_combination(tau):
    online = MlpParams([2, 3, 1], seed=1)
    target = MlpParams([2, 3, 1], seed=2)
    before = target.params.flat.value.copy()
    soft_update(target, online, tau)
    np.testing.assert_allclose(target.params.flat.value, tau * online.params.flat.value + (1 - tau) * before)


def test_soft_update_validates():
    a, b = MlpParams([2, 3, 1], seed=1), MlpParams([2, 4, 1], seed=1)
    with pytest.raises(ValueError):
        soft_update(a, a.clone(), 1.5)
    with pytest.raises(ShapeError):
        soft_update(a, b, 0.5)


def test_clone_is_independent():
    q = CentralCritic(2, [1, 1], seed=0)
    twin = q.clone()
    twin.params.flat.value[:] += 1.0
    assert not np.allclose(q.params.flat.value, twin.params.flat.value)


def test_frozen_forward_gives_no_parameter_grad():
    q = CentralCritic(2, [1], seed=0)
    a = Tensor(np.full((4, 1), 0.2), requires_grad=True)
    tape = Tape()
    tape.backward(tape.sum(q.value(tape, np.ones((4, 2)), a, frozen=True)))
    assert np.all(q.params.flat.grad == 0.0) and np.any(a.grad != 0.0)


def test_checkpoint_round_trip(tmp_path):
    rng = np.random.default_rng(0)
    arrays = {"w": rng.standard_normal((3, 4)), "b": rng.standard_normal(4)}
    save_checkpoint(tmp_path / "c.npz", arrays, {"note": "x"})
    back, meta = load_checkpoint(tmp_path / "c.npz")
    assert meta == {"note": "x"}
    for k in arrays:
        assert back[k].tobytes() == arrays[k].tobytes()


def test_checkpoint_rejects_foreign_file(tmp_path):
    np.savez(tmp_path / "x.npz", __header__=np.frombuffer(b'{"format": "other"}', dtype=np.uint8))
    with pytest.raises(ValueError):
        load_checkpoint(tmp_path / "x.npz")
