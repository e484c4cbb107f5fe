"""Minimal reverse-mode automatic differentiation over dense float64 arrays.

Operations are methods on a :class:`Tape`. A recording tape appends one record
per operation whose inputs require gradients; :meth:`Tape.backward` then walks
the records once in reverse order. A tape built with ``record=False`` only
computes values, which is what target networks and rollouts use.

Gradient semantics follow the usual contract: ``backward`` *accumulates* into
the ``grad`` buffer of every leaf tensor that requires gradients, so callers
zero gradients explicitly (``Tensor.zero_grad`` or ``Parameters.zero_grad``)
before each update. Intermediate gradients live only for the duration of one
backward call.

Randomness never enters this module; reparameterised sampling takes its
standard-normal noise from the caller.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

__all__ = [
    "Tensor",
    "Tape",
    "Parameters",
    "AdamState",
    "adam_step",
    "grad_check",
    "relative_error",
    "ShapeError",
    "DomainError",
]


class ShapeError(ValueError):
    """Raised when operand shapes are incompatible."""


class DomainError(ValueError):
    """Raised when an elementwise op receives a value outside its domain."""


class Tensor:
    """Dense float64 array with an optional gradient buffer.

    ``grad`` may be supplied as a view into a larger buffer (see
    :class:`Parameters`); otherwise it is allocated lazily, which is
    observationally the same as starting all-zero.
    """

    __slots__ = ("value", "_grad", "requires_grad", "node")

    def __init__(self, value, requires_grad: bool = False, grad: np.ndarray | None = None):
        self.value = np.asarray(value, dtype=np.float64)
        if grad is not None and grad.shape != self.value.shape:
            raise ShapeError(f"grad shape {grad.shape} != value shape {self.value.shape}")
        self._grad = grad
        self.requires_grad = requires_grad
        # (tape, index) of the record that produced this tensor; None for leaves
        self.node: tuple[Tape, int] | None = None

    @property
    def shape(self) -> tuple[int, ...]:
        return self.value.shape

    @property
    def grad(self) -> np.ndarray:
        if self._grad is None:
            self._grad = np.zeros_like(self.value)
        return self._grad

    def zero_grad(self) -> None:
        if self._grad is not None:
            self._grad[...] = 0.0

    def _accumulate(self, g: np.ndarray) -> None:
        buf = self.grad
        np.add(buf, g, out=buf)

    def detach(self) -> "Tensor":
        return Tensor(self.value)

    def item(self) -> float:
        return float(self.value)

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"


def _as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


@dataclass
class _Record:
    out: Tensor
    inputs: tuple[Tensor, ...]
    backward: Callable[[np.ndarray], Sequence[np.ndarray | None]]
    name: str


class Tape:
    """Ordered record of differentiable operations.

    Args:
        record: when False, operations compute values only and nothing is kept.
    """

    def __init__(self, record: bool = True):
        self.record = record
        self.ops: list[_Record] = []
        self.last_visits = 0

    def __len__(self) -> int:
        return len(self.ops)

    # -- bookkeeping -----------------------------------------------------------------

    def _emit(self, value: np.ndarray, inputs: tuple[Tensor, ...], backward, name: str) -> Tensor:
        if not self.record or not any(t.requires_grad for t in inputs):
            return Tensor(value)
        for t in inputs:
            if t.node is not None and t.node[0] is not self:
                raise ValueError(f"{name}: input was recorded on a different tape")
        out = Tensor(value, requires_grad=True)
        out.node = (self, len(self.ops))
        self.ops.append(_Record(out, inputs, backward, name))
        return out

    def backward(self, loss: Tensor) -> None:
        """Accumulate d(loss)/d(leaf) into every reachable leaf requiring grad."""
        if loss.value.size != 1:
            raise ShapeError(f"backward needs a scalar loss, got shape {loss.shape}")
        if not loss.requires_grad:
            return
        if loss.node is None:
            loss._accumulate(np.ones_like(loss.value))
            return
        if loss.node[0] is not self:
            raise ValueError("loss was recorded on a different tape")
        end = loss.node[1]
        grads: list[np.ndarray | None] = [None] * (end + 1)
        grads[end] = np.ones_like(loss.value)
        visits = 0
        for idx in range(end, -1, -1):
            g = grads[idx]
            if g is None:
                continue
            grads[idx] = None
            visits += 1
            rec = self.ops[idx]
            in_grads = rec.backward(g)
            for t, gi in zip(rec.inputs, in_grads):
                if gi is None or not t.requires_grad:
                    continue
                if t.node is None:
                    t._accumulate(gi)
                else:
                    j = t.node[1]
                    grads[j] = gi if grads[j] is None else grads[j] + gi
        self.last_visits = visits

    # -- dense ops -------------------------------------------------------------------

    def linear(self, x: Tensor, W: Tensor, b: Tensor) -> Tensor:
        """Row-batched affine map ``x @ W + b``."""
        x = _as_tensor(x)
        if x.value.ndim != 2 or W.value.ndim != 2 or b.value.ndim != 1:
            raise ShapeError(
                f"linear expects x[B,n], W[n,m], b[m]; got {x.shape}, {W.shape}, {b.shape}"
            )
        if x.shape[1] != W.shape[0]:
            raise ShapeError(f"linear: x has {x.shape[1]} columns but W has {W.shape[0]} rows")
        if W.shape[1] != b.shape[0]:
            raise ShapeError(f"linear: W has {W.shape[1]} columns but b has length {b.shape[0]}")
        xv, Wv = x.value, W.value
        out = xv @ Wv + b.value

        def backward(g):
            return (
                g @ Wv.T if x.requires_grad else None,
                xv.T @ g if W.requires_grad else None,
                g.sum(axis=0) if b.requires_grad else None,
            )

        return self._emit(out, (x, W, b), backward, "linear")

    def tanh(self, x: Tensor) -> Tensor:
        y = np.tanh(x.value)
        return self._emit(y, (x,), lambda g: (g * (1.0 - y * y),), "tanh")

    def relu(self, x: Tensor) -> Tensor:
        mask = x.value > 0
        return self._emit(np.where(mask, x.value, 0.0), (x,), lambda g: (g * mask,), "relu")

    def exp(self, x: Tensor) -> Tensor:
        y = np.exp(x.value)
        return self._emit(y, (x,), lambda g: (g * y,), "exp")

    def log(self, x: Tensor) -> Tensor:
        xv = x.value
        bad = ~(xv > 0)
        if bad.any():
            idx = tuple(int(i) for i in np.argwhere(bad)[0])
            raise DomainError(f"log of non-positive value {xv[idx]!r} at index {idx}")
        return self._emit(np.log(xv), (x,), lambda g: (g / xv,), "log")

    def square(self, x: Tensor) -> Tensor:
        xv = x.value
        return self._emit(xv * xv, (x,), lambda g: (2.0 * xv * g,), "square")

    def negate(self, x: Tensor) -> Tensor:
        return self._emit(-x.value, (x,), lambda g: (-g,), "negate")

    def elementwise(self, x: Tensor, kind: str) -> Tensor:
        fn = {
            "tanh": self.tanh,
            "relu": self.relu,
            "exp": self.exp,
            "log": self.log,
            "square": self.square,
            "negate": self.negate,
        }.get(kind)
        if fn is None:
            raise ValueError(f"unknown elementwise kind {kind!r}")
        return fn(x)

    def clip(self, x: Tensor, lo: float, hi: float) -> Tensor:
        """Clamp; gradient passes only where the input is inside ``[lo, hi]``."""
        xv = x.value
        inside = (xv >= lo) & (xv <= hi)
        return self._emit(np.clip(xv, lo, hi), (x,), lambda g: (g * inside,), "clip")

    def add(self, a: Tensor, b: Tensor) -> Tensor:
        a, b = _as_tensor(a), _as_tensor(b)
        _same_shape("add", a, b)
        return self._emit(a.value + b.value, (a, b), lambda g: (g, g), "add")

    def sub(self, a: Tensor, b: Tensor) -> Tensor:
        a, b = _as_tensor(a), _as_tensor(b)
        _same_shape("sub", a, b)
        return self._emit(a.value - b.value, (a, b), lambda g: (g, -g), "sub")

    def mul(self, a: Tensor, b: Tensor) -> Tensor:
        a, b = _as_tensor(a), _as_tensor(b)
        _same_shape("mul", a, b)
        av, bv = a.value, b.value
        return self._emit(av * bv, (a, b), lambda g: (g * bv, g * av), "mul")

    def add_const(self, x: Tensor, c: float) -> Tensor:
        return self._emit(x.value + c, (x,), lambda g: (g,), "add_const")

    def mul_const(self, x: Tensor, c: float) -> Tensor:
        return self._emit(x.value * c, (x,), lambda g: (g * c,), "mul_const")

    def scale(self, x: Tensor, s: Tensor) -> Tensor:
        """Multiply every element of ``x`` by the single-element tensor ``s``."""
        if s.value.size != 1:
            raise ShapeError(f"scale factor must have one element, got shape {s.shape}")
        xv, sv = x.value, s.value
        sf = float(sv.reshape(()))

        def backward(g):
            gs = np.full_like(sv, float(np.sum(g * xv))) if s.requires_grad else None
            return (g * sf if x.requires_grad else None, gs)

        return self._emit(xv * sf, (x, s), backward, "scale")

    def sum(self, x: Tensor, axis: int | None = None) -> Tensor:
        """Sum of all elements (scalar), or per-row sum with ``axis=1`` (shape [B,1])."""
        xv = x.value
        if xv.size == 0:
            raise ShapeError("sum of an empty tensor")
        if axis is None:
            return self._emit(np.asarray(xv.sum()), (x,), lambda g: (np.full_like(xv, g),), "sum")
        if axis != 1 or xv.ndim != 2:
            raise ShapeError("sum supports axis=None or axis=1 on a 2-D tensor")
        return self._emit(
            xv.sum(axis=1, keepdims=True),
            (x,),
            lambda g: (np.broadcast_to(g, xv.shape).copy(),),
            "sum_rows",
        )

    def mean(self, x: Tensor) -> Tensor:
        xv = x.value
        if xv.size == 0:
            raise ShapeError("mean of an empty tensor")
        n = xv.size
        return self._emit(
            np.asarray(xv.mean()), (x,), lambda g: (np.full_like(xv, g / n),), "mean"
        )

    def reduce(self, x: Tensor, kind: str) -> Tensor:
        if kind == "sum":
            return self.sum(x)
        if kind == "mean":
            return self.mean(x)
        raise ValueError(f"unknown reduction {kind!r}")

    def concat(self, xs: Sequence[Tensor]) -> Tensor:
        """Column-wise concatenation of ``[B, d_i]`` tensors."""
        xs = [_as_tensor(x) for x in xs]
        if not xs:
            raise ShapeError("concat of an empty list")
        if len(xs) == 1:
            return xs[0]
        rows = {x.shape[0] for x in xs}
        if len(rows) != 1 or any(x.value.ndim != 2 for x in xs):
            raise ShapeError(f"concat needs 2-D inputs with equal rows, got {[x.shape for x in xs]}")
        bounds = np.cumsum([0] + [x.shape[1] for x in xs])
        out = np.concatenate([x.value for x in xs], axis=1)

        def backward(g):
            return [g[:, bounds[i] : bounds[i + 1]] for i in range(len(xs))]

        return self._emit(out, tuple(xs), backward, "concat")

    def reparam_sample(self, mu: Tensor, log_std: Tensor, noise: np.ndarray) -> Tensor:
        """``mu + exp(log_std) * noise`` with caller-supplied standard normal noise."""
        noise = np.asarray(noise, dtype=np.float64)
        if mu.shape != log_std.shape or mu.shape != noise.shape:
            raise ShapeError(
                f"reparam_sample shapes differ: mu {mu.shape}, log_std {log_std.shape}, "
                f"noise {noise.shape}"
            )
        scaled = np.exp(log_std.value) * noise
        return self._emit(
            mu.value + scaled, (mu, log_std), lambda g: (g, g * scaled), "reparam_sample"
        )


def _same_shape(name: str, a: Tensor, b: Tensor) -> None:
    if a.shape != b.shape:
        raise ShapeError(f"{name}: shapes {a.shape} and {b.shape} differ")


class Parameters:
    """A set of parameter tensors stored contiguously.

    Every tensor in ``tensors`` is a view into ``flat.value`` and its gradient a
    view into ``flat.grad``, so optimisers and soft updates can act on the one
    flat tensor.
    """

    def __init__(self, shapes: Sequence[tuple[int, ...]]):
        self.shapes = [tuple(int(d) for d in s) for s in shapes]
        sizes = [int(np.prod(s)) for s in self.shapes]
        total = int(sum(sizes))
        value = np.zeros(total)
        grad = np.zeros(total)
        self.flat = Tensor(value, requires_grad=True, grad=grad)
        self.tensors: list[Tensor] = []
        self.frozen: list[Tensor] = []
        offset = 0
        for shape, size in zip(self.shapes, sizes):
            v = value[offset : offset + size].reshape(shape)
            g = grad[offset : offset + size].reshape(shape)
            self.tensors.append(Tensor(v, requires_grad=True, grad=g))
            # same storage, no gradient: used when another loss must not update us
            self.frozen.append(Tensor(v))
            offset += size

    def __len__(self) -> int:
        return len(self.tensors)

    @property
    def size(self) -> int:
        return self.flat.value.size

    def zero_grad(self) -> None:
        self.flat.grad[...] = 0.0

    def copy_from(self, other: "Parameters") -> None:
        if other.shapes != self.shapes:
            raise ShapeError(f"parameter shapes differ: {self.shapes} vs {other.shapes}")
        self.flat.value[...] = other.flat.value


@dataclass
class AdamState:
    """Adam moments for a list of parameters."""

    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: list[np.ndarray] = field(default_factory=list)
    v: list[np.ndarray] = field(default_factory=list)

    @classmethod
    def for_params(cls, params: Sequence[Tensor], lr: float, **kw) -> "AdamState":
        return cls(
            lr=lr,
            m=[np.zeros_like(p.value) for p in params],
            v=[np.zeros_like(p.value) for p in params],
            **kw,
        )


def adam_step(params: Sequence[Tensor], state: AdamState) -> None:
    """One bias-corrected Adam update in place. Gradients are left untouched."""
    if len(state.m) != len(params):
        raise ValueError(f"AdamState tracks {len(state.m)} tensors, got {len(params)}")
    state.step += 1
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1**state.step
    c2 = 1.0 - b2**state.step
    for p, m, v in zip(params, state.m, state.v):
        g = p.grad
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * (g * g)
        p.value -= state.lr * (m / c1) / (np.sqrt(v / c2) + state.eps)


def relative_error(analytic: np.ndarray, numeric: np.ndarray, floor: float = 1e-6) -> float:
    """Worst per-coordinate ``|a - n| / max(|a|, |n|, floor)``.

    The floor keeps coordinates whose true gradient is ~0 from turning
    finite-difference round-off into a huge ratio.
    """
    a = np.ravel(analytic)
    n = np.ravel(numeric)
    if a.size == 0:
        return 0.0
    denom = np.maximum(np.maximum(np.abs(a), np.abs(n)), floor)
    return float(np.max(np.abs(a - n) / denom))


LossBuilder = Callable[[np.random.Generator], tuple[Callable[[Tape], Tensor], Sequence[Tensor]]]


def grad_check(
    build: LossBuilder,
    trials: int = 100,
    h: float = 1e-5,
    rng: np.random.Generator | int | None = 0,
    tape_factory: Callable[[], Tape] = Tape,
    floor: float = 1e-6,
) -> float:
    """Compare reverse-mode gradients to central finite differences.

    ``build(rng)`` returns ``(loss_fn, params)``: ``loss_fn(tape)`` must
    rebuild the scalar loss from the current values of ``params``. Returns the
    worst relative error (see :func:`relative_error`) over all trials.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    rng = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
    worst = 0.0
    for _ in range(trials):
        loss_fn, params = build(rng)
        for p in params:
            p.zero_grad()
        tape = tape_factory()
        tape.backward(loss_fn(tape))
        analytic = np.concatenate([p.grad.ravel().copy() for p in params])

        numeric = []
        for p in params:
            flat = p.value.reshape(-1)
            for j in range(flat.size):
                orig = flat[j]
                flat[j] = orig + h
                up = loss_fn(Tape(record=False)).item()
                flat[j] = orig - h
                down = loss_fn(Tape(record=False)).item()
                flat[j] = orig
                numeric.append((up - down) / (2.0 * h))
        worst = max(worst, relative_error(analytic, np.asarray(numeric), floor))
    return worst
