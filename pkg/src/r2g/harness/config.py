"""Run configuration and its YAML file format.

Precedence, lowest to highest: dataclass defaults, values from a config
file, explicit command-line flags.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import yaml

from ..envs import game_names
from ..marl.config import TrainerConfig


@dataclass
class RunConfig:
    """One experiment: an environment, a trainer configuration and a list of seeds.

    ``trainer.seed`` is ignored when running; each entry of ``seeds`` gives
    one run whose snapshot records that seed.
    """

    env: str = "zero_sum"
    seeds: tuple[int, ...] = (0,)
    output_dir: str = "runs"
    trainer: TrainerConfig = field(default_factory=TrainerConfig)

    def __post_init__(self):
        self.seeds = tuple(int(s) for s in self.seeds)
        if not self.seeds:
            raise ValueError("at least one seed is required")
        if self.env not in game_names() and not (self.env.startswith("coord") and self.env[5:].isdigit()):
            raise ValueError(f"unknown env {self.env!r}; choose from {', '.join(game_names())}")
        if isinstance(self.trainer, dict):
            self.trainer = TrainerConfig.from_dict(self.trainer)

    @property
    def algo(self) -> str:
        return self.trainer.algo

    @property
    def k(self) -> int:
        return self.trainer.k

    def for_seed(self, seed: int) -> "RunConfig":
        return replace(self, seeds=(int(seed),), trainer=replace(self.trainer, seed=int(seed)))

    def run_dir(self, seed: int) -> Path:
        return Path(self.output_dir) / self.env / f"{self.algo}-k{self.k}" / f"seed{int(seed)}"

    def to_dict(self) -> dict:
        return {
            "env": self.env,
            "seeds": list(self.seeds),
            "output_dir": self.output_dir,
            "trainer": self.trainer.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        names = {f.name for f in fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        d = dict(d)
        d["trainer"] = TrainerConfig.from_dict(d.get("trainer") or {})
        return cls(**d)

    def dumps(self) -> str:
        return yaml.safe_dump(self.to_dict(), sort_keys=False, default_flow_style=None)

    @classmethod
    def loads(cls, text: str) -> "RunConfig":
        data = yaml.safe_load(text) or {}
        if not isinstance(data, dict):
            raise ValueError("config file must hold a mapping")
        return cls.from_dict(data)

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.dumps())

    @classmethod
    def load(cls, path: str | Path) -> "RunConfig":
        return cls.loads(Path(path).read_text())
