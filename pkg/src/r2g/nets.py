"""Network architectures used by every learner.

All networks keep their weights in a single :class:`~r2g.diffcore.Parameters`
block so that Adam and Polyak averaging touch one contiguous vector.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Sequence

import numpy as np

from .diffcore import Parameters, ShapeError, Tape, Tensor

LOG_STD_MIN = -20.0
LOG_STD_MAX = 2.0
SQUASH_EPS = 1e-6
HEAD_INIT = 3e-3
_HALF_LOG_2PI = 0.5 * np.log(2.0 * np.pi)

CHECKPOINT_VERSION = 1


def _uniform_init(params: Parameters, layer_dims: list[tuple[int, int]], rng, head_scale=None):
    """Fill (W, b) pairs: W ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)), b = 0.

    ``head_scale`` overrides the bound for the last ``len(head_scale)`` layers.
    """
    head_scale = head_scale or []
    n_layers = len(layer_dims)
    for li, (fan_in, fan_out) in enumerate(layer_dims):
        W, b = params.tensors[2 * li], params.tensors[2 * li + 1]
        bound = 1.0 / np.sqrt(fan_in)
        from_end = n_layers - li
        if from_end <= len(head_scale):
            bound = head_scale[len(head_scale) - from_end]
        W.value[...] = rng.uniform(-bound, bound, size=(fan_in, fan_out))
        b.value[...] = 0.0


def _activate(tape: Tape, x: Tensor, kind: str) -> Tensor:
    if kind == "tanh":
        return tape.tanh(x)
    if kind == "relu":
        return tape.relu(x)
    raise ValueError(f"unknown activation {kind!r}")


class MlpParams:
    """Fully connected network: hidden layers with an activation, linear output.

    Args:
        dims: layer widths, input first, e.g. ``[4, 16, 16, 1]``.
        activation: ``"tanh"`` or ``"relu"`` for hidden layers.
        seed: integer seed or Generator for initialisation.
        output_init: if given, the output layer is drawn from U(-output_init, output_init).
        output_activation: optional ``"tanh"`` squashing of the output (deterministic policies).
    """

    def __init__(
        self,
        dims: Sequence[int],
        activation: str = "tanh",
        seed: int | np.random.Generator = 0,
        output_init: float | None = None,
        output_activation: str | None = None,
    ):
        dims = [int(d) for d in dims]
        if len(dims) < 2 or any(d <= 0 for d in dims):
            raise ShapeError(f"invalid layer dims {dims}")
        self.dims = dims
        self.activation = activation
        self.output_activation = output_activation
        self.layer_dims = list(zip(dims[:-1], dims[1:]))
        shapes = []
        for fi, fo in self.layer_dims:
            shapes += [(fi, fo), (fo,)]
        self.params = Parameters(shapes)
        rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
        _uniform_init(self.params, self.layer_dims, rng, [output_init] if output_init else None)

    @property
    def hidden(self) -> list[int]:
        return self.dims[1:-1]

    @property
    def in_dim(self) -> int:
        return self.dims[0]

    @property
    def out_dim(self) -> int:
        return self.dims[-1]

    def forward(self, tape: Tape, x: Tensor, frozen: bool = False) -> Tensor:
        ts = self.params.frozen if frozen else self.params.tensors
        h = x
        last = len(self.layer_dims) - 1
        for li in range(len(self.layer_dims)):
            h = tape.linear(h, ts[2 * li], ts[2 * li + 1])
            if li < last:
                h = _activate(tape, h, self.activation)
        if self.output_activation is not None:
            h = _activate(tape, h, self.output_activation)
        return h

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return self.forward(Tape(record=False), Tensor(np.atleast_2d(x))).value

    def clone(self) -> "MlpParams":
        twin = MlpParams.__new__(MlpParams)
        twin.dims = list(self.dims)
        twin.activation = self.activation
        twin.output_activation = self.output_activation
        twin.layer_dims = list(self.layer_dims)
        twin.params = Parameters(self.params.shapes)
        twin.params.copy_from(self.params)
        return twin


def init_params(dims: Sequence[int], seed: int | np.random.Generator = 0, **kw) -> MlpParams:
    return MlpParams(dims, seed=seed, **kw)


def soft_update(target, online, tau: float) -> None:
    """Polyak averaging ``target <- tau * online + (1 - tau) * target``."""
    if not 0.0 <= tau <= 1.0:
        raise ValueError(f"tau must lie in [0, 1], got {tau}")
    tp, op = _parameters_of(target), _parameters_of(online)
    if tp.shapes != op.shapes:
        raise ShapeError(f"soft_update shape mismatch: {tp.shapes} vs {op.shapes}")
    t = tp.flat.value
    if tau == 1.0:
        t[...] = op.flat.value
    elif tau > 0.0:
        t *= 1.0 - tau
        t += tau * op.flat.value


def _parameters_of(obj) -> Parameters:
    if isinstance(obj, Parameters):
        return obj
    return obj.params


def squash_log_prob(tape: Tape, u: Tensor, log_std: Tensor, noise: np.ndarray):
    """Action ``tanh(u)`` and its log-density, given ``u = mu + exp(log_std) * noise``.

    ``log N(u; mu, sigma)`` equals ``-noise^2/2 - log_std - log(2 pi)/2`` because
    the noise is held fixed; the tanh change of variables subtracts
    ``sum log(1 - tanh(u)^2 + eps)``.
    """
    action = tape.tanh(u)
    gauss_const = -0.5 * np.sum(noise * noise, axis=1, keepdims=True) - _HALF_LOG_2PI * noise.shape[1]
    gauss = tape.add(tape.negate(tape.sum(log_std, axis=1)), Tensor(gauss_const))
    correction = tape.sum(tape.log(tape.add_const(tape.negate(tape.square(action)), 1.0 + SQUASH_EPS)), axis=1)
    return action, tape.sub(gauss, correction)


class SquashedGaussianPolicy:
    """Diagonal Gaussian over pre-squash actions, squashed by tanh into (-1, 1)."""

    def __init__(
        self,
        in_dim: int,
        action_dim: int,
        hidden: Sequence[int] = (16, 16),
        activation: str = "tanh",
        seed: int | np.random.Generator = 0,
    ):
        rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
        self.in_dim = int(in_dim)
        self.action_dim = int(action_dim)
        self.hidden = [int(h) for h in hidden]
        self.activation = activation
        dims = [self.in_dim, *self.hidden]
        self.trunk_dims = list(zip(dims[:-1], dims[1:]))
        width = dims[-1]
        shapes = []
        for fi, fo in self.trunk_dims:
            shapes += [(fi, fo), (fo,)]
        shapes += [(width, self.action_dim), (self.action_dim,)] * 2
        self.params = Parameters(shapes)
        layer_dims = self.trunk_dims + [(width, self.action_dim)] * 2
        _uniform_init(self.params, layer_dims, rng, [HEAD_INIT, HEAD_INIT])
        self.calls = 0

    def _heads(self, tape: Tape, x: Tensor, frozen: bool):
        ts = self.params.frozen if frozen else self.params.tensors
        h = x
        n = len(self.trunk_dims)
        for li in range(n):
            h = _activate(tape, tape.linear(h, ts[2 * li], ts[2 * li + 1]), self.activation)
        mu = tape.linear(h, ts[2 * n], ts[2 * n + 1])
        log_std = tape.clip(tape.linear(h, ts[2 * n + 2], ts[2 * n + 3]), LOG_STD_MIN, LOG_STD_MAX)
        return mu, log_std

    def _check_input(self, x: Tensor) -> None:
        if x.value.ndim != 2 or x.shape[1] != self.in_dim:
            raise ShapeError(f"policy expects input [B, {self.in_dim}], got {x.shape}")

    def sample(self, tape: Tape, x: Tensor, noise: np.ndarray, frozen: bool = False):
        """Reparameterised sample. Returns ``(action, log_prob)`` tensors, shapes [B,d], [B,1]."""
        x = x if isinstance(x, Tensor) else Tensor(x)
        self._check_input(x)
        noise = np.asarray(noise, dtype=np.float64)
        if noise.shape != (x.shape[0], self.action_dim):
            raise ShapeError(f"noise shape {noise.shape} != {(x.shape[0], self.action_dim)}")
        self.calls += 1
        mu, log_std = self._heads(tape, x, frozen)
        u = tape.reparam_sample(mu, log_std, noise)
        return squash_log_prob(tape, u, log_std, noise)

    def distribution(self, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Pre-squash mean and (clamped) log-std as arrays."""
        xt = Tensor(np.atleast_2d(x))
        self._check_input(xt)
        mu, log_std = self._heads(Tape(record=False), xt, True)
        return mu.value, log_std.value

    def most_likely(self, x: np.ndarray) -> np.ndarray:
        mu, _ = self.distribution(x)
        return np.tanh(mu)

    def log_prob(self, x: np.ndarray, action: np.ndarray) -> np.ndarray:
        """Log-density of given squashed actions (no gradient)."""
        mu, log_std = self.distribution(x)
        action = np.clip(np.atleast_2d(action), -1 + 1e-12, 1 - 1e-12)
        u = np.arctanh(action)
        noise = (u - mu) / np.exp(log_std)
        gauss = np.sum(-0.5 * noise**2 - log_std - _HALF_LOG_2PI, axis=1, keepdims=True)
        return gauss - np.sum(np.log(1.0 - action**2 + SQUASH_EPS), axis=1, keepdims=True)


def policy_sample(p: SquashedGaussianPolicy, s, noise, tape: Tape | None = None):
    tape = tape if tape is not None else Tape(record=False)
    return p.sample(tape, s, noise)


def policy_most_likely(p: SquashedGaussianPolicy, s) -> np.ndarray:
    return p.most_likely(s)


class CentralCritic:
    """Q(s, a_i, a_-i) as an MLP over the concatenated inputs."""

    def __init__(
        self,
        state_dim: int,
        action_dims: Sequence[int],
        hidden: Sequence[int] = (16, 16),
        activation: str = "tanh",
        seed: int | np.random.Generator = 0,
    ):
        self.state_dim = int(state_dim)
        self.action_dims = [int(d) for d in action_dims]
        in_dim = self.state_dim + sum(self.action_dims)
        self.mlp = MlpParams([in_dim, *hidden, 1], activation=activation, seed=seed)

    @property
    def params(self) -> Parameters:
        return self.mlp.params

    @property
    def in_dim(self) -> int:
        return self.mlp.in_dim

    def value(self, tape: Tape, s, a_i, a_minus_i: Sequence = (), frozen: bool = False) -> Tensor:
        """Batched Q values, shape [B, 1]. ``a_minus_i`` lists opponents' actions in index order."""
        parts = [s, a_i, *a_minus_i]
        parts = [p if isinstance(p, Tensor) else Tensor(np.atleast_2d(p)) for p in parts]
        width = sum(p.shape[1] for p in parts)
        if width != self.in_dim:
            raise ShapeError(f"critic expects input width {self.in_dim}, got {width}")
        return self.mlp.forward(tape, tape.concat(parts), frozen=frozen)

    def clone(self) -> "CentralCritic":
        twin = CentralCritic.__new__(CentralCritic)
        twin.state_dim = self.state_dim
        twin.action_dims = list(self.action_dims)
        twin.mlp = self.mlp.clone()
        return twin


def critic_value(q: CentralCritic, s, a_i, a_minus_i=()) -> np.ndarray:
    return q.value(Tape(record=False), s, a_i, a_minus_i).value


class CentralActor:
    """Best-response network: squashed Gaussian over concat(s, neighbours' actions)."""

    def __init__(
        self,
        state_dim: int,
        action_dim: int,
        opponent_dims: Sequence[int],
        hidden: Sequence[int] = (16, 16),
        activation: str = "tanh",
        seed: int | np.random.Generator = 0,
    ):
        self.state_dim = int(state_dim)
        self.opponent_dims = [int(d) for d in opponent_dims]
        self.policy = SquashedGaussianPolicy(
            self.state_dim + sum(self.opponent_dims), action_dim, hidden, activation, seed
        )

    @property
    def params(self) -> Parameters:
        return self.policy.params

    @property
    def action_dim(self) -> int:
        return self.policy.action_dim

    @property
    def calls(self) -> int:
        return self.policy.calls

    @calls.setter
    def calls(self, n: int) -> None:
        self.policy.calls = n

    def _input(self, tape: Tape, s, a_minus_i) -> Tensor:
        parts = [s, *a_minus_i]
        parts = [p if isinstance(p, Tensor) else Tensor(np.atleast_2d(p)) for p in parts]
        return tape.concat(parts)

    def act(self, tape: Tape, s, a_minus_i, noise, frozen: bool = False):
        return self.policy.sample(tape, self._input(tape, s, a_minus_i), noise, frozen=frozen)

    def most_likely(self, s, a_minus_i) -> np.ndarray:
        return self.policy.most_likely(self._input(Tape(record=False), s, a_minus_i).value)


def central_actor_act(c: CentralActor, s, a_minus_i, noise, tape: Tape | None = None):
    tape = tape if tape is not None else Tape(record=False)
    return c.act(tape, s, a_minus_i, noise)


# -- checkpoints -------------------------------------------------------------------------


def save_checkpoint(path: str | Path, arrays: dict[str, np.ndarray], meta: dict | None = None) -> None:
    """Write named float64 arrays to an ``.npz`` file.

    The archive carries a ``__header__`` entry: JSON with the format version,
    every array's shape, and optional metadata. Values round-trip bit-exactly.
    """
    header = {
        "format": "r2g-checkpoint",
        "version": CHECKPOINT_VERSION,
        "shapes": {k: list(np.shape(v)) for k, v in arrays.items()},
        "meta": meta or {},
    }
    payload = {k: np.asarray(v, dtype=np.float64) for k, v in arrays.items()}
    payload["__header__"] = np.frombuffer(json.dumps(header, sort_keys=True).encode(), dtype=np.uint8)
    with open(path, "wb") as fh:
        np.savez(fh, **payload)


def load_checkpoint(path: str | Path) -> tuple[dict[str, np.ndarray], dict]:
    with np.load(path) as data:
        header = json.loads(bytes(data["__header__"]).decode())
        if header.get("format") != "r2g-checkpoint" or header.get("version") != CHECKPOINT_VERSION:
            raise ValueError(f"{path}: unsupported checkpoint header {header.get('format')!r} "
                             f"v{header.get('version')}")
        arrays = {k: data[k].copy() for k in header["shapes"]}
    for k, shape in header["shapes"].items():
        if list(arrays[k].shape) != shape:
            raise ValueError(f"{path}: array {k} has shape {arrays[k].shape}, header says {shape}")
    return arrays, header.get("meta", {})
