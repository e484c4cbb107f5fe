from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from r2g.diffcore import (
    AdamState,
    DomainError,
    Parameters,
    ShapeError,
    Tape,
    Tensor,
    adam_step,
    grad_check,
    relative_error,
)


def numeric_grad(f, x: np.ndarray, h: float = 1e-6) -> np.ndarray:
    g = np.zeros_like(x)
    for idx in np.ndindex(x.shape):
        orig = x[idx]
        x[idx] = orig + h
        up = f(x)
        x[idx] = orig - h
        down = f(x)
        x[idx] = orig
        g[idx] = (up - down) / (2 * h)
    return g


UNARY = {
    "tanh": (lambda t, x: t.tanh(x), np.tanh),
    "exp": (lambda t, x: t.exp(x), np.exp),
    "square": (lambda t, x: t.square(x), np.square),
    "negate": (lambda t, x: t.negate(x), np.negative),
    "log": (lambda t, x: t.log(t.add_const(t.square(x), 0.5)), lambda v: np.log(v * v + 0.5)),
    "relu": (lambda t, x: t.relu(x), lambda v: np.maximum(v, 0.0)),
}


@pytest.mark.parametrize("name", sorted(UNARY))
def test_unary_op_gradient_matches_finite_differences(name):
    op, ref = UNARY[name]
    rng = np.random.default_rng(1)
    x0 = rng.uniform(-1.5, 1.5, (3, 4))
    x0[np.abs(x0) < 1e-3] = 0.1  # keep away from the relu kink
    w = rng.standard_normal((3, 4))

    x = Tensor(x0.copy(), requires_grad=True)
    tape = Tape()
    tape.backward(tape.sum(tape.mul(op(tape, x), Tensor(w))))
    num = numeric_grad(lambda v: float(np.sum(ref(v) * w)), x0.copy())
    assert relative_error(x.grad, num) < 1e-6


def test_linear_concat_and_reductions():
    rng = np.random.default_rng(2)
    x0, W0, b0 = rng.standard_normal((5, 3)), rng.standard_normal((3, 2)), rng.standard_normal(2)
    c0 = rng.standard_normal((5, 1))

    def value(x, W, b, c):
        return np.mean(np.sum(np.concatenate([x @ W + b, c], axis=1) ** 2, axis=1))

    x, W, b, c = (Tensor(v.copy(), requires_grad=True) for v in (x0, W0, b0, c0))
    tape = Tape()
    out = tape.concat([tape.linear(x, W, b), c])
    tape.backward(tape.mean(tape.sum(tape.square(out), axis=1)))
    args = [x0, W0, b0, c0]
    for j, t in enumerate((x, W, b, c)):
        def f(v, j=j):
            a = list(args)
            a[j] = v
            return value(*a)

        assert relative_error(t.grad, numeric_grad(f, args[j].copy())) < 1e-6


def test_scale_and_reparam_sample():
    rng = np.random.default_rng(3)
    mu0, ls0 = rng.standard_normal((4, 2)), rng.uniform(-1, 0.5, (4, 2))
    eps = rng.standard_normal((4, 2))
    s0 = np.array([0.7])
    mu, ls, s = (Tensor(v.copy(), requires_grad=True) for v in (mu0, ls0, s0))
    tape = Tape()
    tape.backward(tape.sum(tape.scale(tape.tanh(tape.reparam_sample(mu, ls, eps)), s)))

    def f(m, l, sc):
        return float(np.sum(np.tanh(m + np.exp(l) * eps)) * sc[0])

    assert relative_error(mu.grad, numeric_grad(lambda v: f(v, ls0, s0), mu0.copy())) < 1e-6
    assert relative_error(ls.grad, numeric_grad(lambda v: f(mu0, v, s0), ls0.copy())) < 1e-6
    assert relative_error(s.grad, numeric_grad(lambda v: f(mu0, ls0, v), s0.copy())) < 1e-6


def test_clip_passes_gradient_only_inside():
    x = Tensor(np.array([-3.0, 0.0, 3.0]), requires_grad=True)
    tape = Tape()
    tape.backward(tape.sum(tape.clip(x, -1.0, 1.0)))
    np.testing.assert_array_equal(x.grad, [0.0, 1.0, 0.0])


def test_log_of_nonpositive_raises_with_index():
    tape = Tape()
    with pytest.raises(DomainError, match="index"):
        tape.log(Tensor(np.array([1.0, -2.0]), requires_grad=True))


def test_shape_mismatch_raises():
    tape = Tape()
    with pytest.raises(ShapeError):
        tape.add(Tensor(np.zeros((2, 3)), True), Tensor(np.zeros((3, 2)), True))


def test_gradients_accumulate_until_zeroed():
    x = Tensor(np.array([2.0]), requires_grad=True)
    for _ in range(2):
        tape = Tape()
        tape.backward(tape.sum(tape.square(x)))
    assert x.grad[0] == pytest.approx(8.0)
    x.zero_grad()
    assert x.grad[0] == 0.0


def test_shared_subexpression_visited_once():
    x = Tensor(np.array([0.3, -0.2]), requires_grad=True)
    tape = Tape()
    h = tape.tanh(x)
    loss = tape.sum(tape.add(tape.mul(h, h), h))
    tape.backward(loss)
    assert tape.last_visits == len(tape)
    t = np.tanh(x.value)
    np.testing.assert_allclose(x.grad, (2 * t + 1) * (1 - t**2))


def test_non_recording_tape_keeps_nothing():
    tape = Tape(record=False)
    y = tape.tanh(Tensor(np.ones(3), requires_grad=True))
    assert len(tape) == 0 and not y.requires_grad


def test_parameters_share_flat_storage_and_frozen_views_carry_no_grad():
    p = Parameters([(2, 3), (3,)])
    p.flat.value[:] = np.arange(9.0)
    np.testing.assert_array_equal(p.tensors[0].value, np.arange(6.0).reshape(2, 3))
    np.testing.assert_array_equal(p.frozen[1].value, [6.0, 7.0, 8.0])

    tape = Tape()
    x = Tensor(np.ones((1, 2)))
    tape.backward(tape.sum(tape.linear(x, p.tensors[0], p.tensors[1])))
    np.testing.assert_array_equal(p.flat.grad, np.ones(9))
    p.zero_grad()
    tape = Tape()
    out = tape.sum(tape.linear(x, p.frozen[0], p.frozen[1]))
    assert not out.requires_grad


def test_adam_first_steps_match_reference():
    # with bias correction the first step moves each coordinate by lr * sign(g)
    p = Tensor(np.array([1.0, -2.0, 0.5]), requires_grad=True)
    st_ = AdamState.for_params([p], lr=0.01)
    grads = [np.array([0.3, -4.0, 1e-3]), np.array([0.1, 2.0, -1e-3])]
    m = np.zeros(3)
    v = np.zeros(3)
    ref = p.value.copy()
    for t, g in enumerate(grads, start=1):
        p.grad[...] = g
        adam_step([p], st_)
        m = 0.9 * m + 0.1 * g
        v = 0.999 * v + 0.001 * g * g
        ref = ref - 0.01 * (m / (1 - 0.9**t)) / (np.sqrt(v / (1 - 0.999**t)) + 1e-8)
        if t == 1:
            np.testing.assert_allclose(p.value, [1.0 - 0.01, -2.0 + 0.01, 0.5 - 0.01], rtol=0, atol=1e-7)
    np.testing.assert_allclose(p.value, ref, rtol=1e-14)


def test_grad_check_detects_a_wrong_gradient():
    class BrokenTape(Tape):
        def tanh(self, x):
            return self._emit(np.tanh(x.value), (x,), lambda g: (g,), "tanh")

    def build(rng):
        w = Tensor(rng.standard_normal(3), requires_grad=True)
        return (lambda tape: tape.sum(tape.tanh(w))), [w]

    assert grad_check(build, trials=3, tape_factory=Tape) < 1e-6
    assert grad_check(build, trials=3, tape_factory=BrokenTape) > 1e-2


@given(arrays(np.float64, st.tuples(st.integers(1, 4), st.integers(1, 4)),
              elements=st.floats(-3, 3, allow_nan=False)))
def test_sum_mean_gradients_are_uniform(x0):
    x = Tensor(x0.copy(), requires_grad=True)
    tape = Tape()
    tape.backward(tape.mean(x))
    np.testing.assert_allclose(x.grad, np.full(x0.shape, 1.0 / x0.size))


@given(st.floats(-5, 5), st.floats(-5, 5))
def test_mul_is_commutative_in_value_and_gradient(a, b):
    xa = Tensor(np.array([a]), requires_grad=True)
    xb = Tensor(np.array([b]), requires_grad=True)
    tape = Tape()
    tape.backward(tape.sum(tape.mul(xa, xb)))
    assert xa.grad[0] == b and xb.grad[0] == a
