from __future__ import annotations

from dataclasses import asdict, dataclass, fields

ALGOS = ("r2g", "masac", "maddpg", "sac")
GRAD_MODES = ("detached", "flow_through")


@dataclass
class TrainerConfig:
    """Hyperparameters of one training run.

    ``masac`` is R2G with ``k = 0``: the constructor forces ``k`` to 0 so the
    two names select the same code path. ``k`` has no meaning for ``maddpg``
    and ``sac`` and is likewise pinned to 0. ``train_iters=None`` means one
    gradient iteration per exploration step.
    """

    algo: str = "r2g"
    k: int = 1
    gamma: float = 0.99
    tau: float = 0.005
    batch_size: int = 256
    epochs: int = 1000
    steps_per_epoch: int = 100
    train_iters: int | None = None
    critic_lr: float = 1e-3
    policy_lr: float = 1e-4
    central_actor_lr: float = 1e-4
    alpha_lr: float = 1e-4
    hidden: tuple[int, ...] = (16, 16)
    activation: str = "relu"
    target_entropy: float | None = None
    grad_mode: str = "detached"
    ou_theta: float = 0.15
    ou_mu: float = 0.0
    ou_sigma: float = 0.2
    buffer_capacity: int = 1_000_000
    warmup_steps: int = 5000
    seed: int = 0

    def __post_init__(self):
        if self.algo not in ALGOS:
            raise ValueError(f"unknown algo {self.algo!r}; choose from {', '.join(ALGOS)}")
        if self.grad_mode not in GRAD_MODES:
            raise ValueError(f"unknown grad_mode {self.grad_mode!r}; choose from {', '.join(GRAD_MODES)}")
        if self.algo != "r2g":
            self.k = 0
        if self.k < 0:
            raise ValueError("recursion level k must be >= 0")
        self.hidden = tuple(int(h) for h in self.hidden)

    @property
    def iterations_per_epoch(self) -> int:
        return self.steps_per_epoch if self.train_iters is None else self.train_iters

    def to_dict(self) -> dict:
        d = asdict(self)
        d["hidden"] = list(self.hidden)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "TrainerConfig":
        names = {f.name for f in fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise ValueError(f"unknown trainer fields: {sorted(unknown)}")
        return cls(**d)
