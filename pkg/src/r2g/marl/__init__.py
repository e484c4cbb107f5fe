from .agents import AgentBundle, DeterministicAgent, load_agent_arrays, save_agents
from .config import ALGOS, TrainerConfig
from .graph import Messages, ReasoningGraph, level0_actions, message_pass
from .losses import central_actor_loss, critic_loss, critic_target, policy_loss, temperature_loss
from .noise import OUNoise
from .trainer import EpochMetrics, MaddpgTrainer, SoftTrainer, make_trainer

__all__ = [
    "ALGOS",
    "AgentBundle",
    "DeterministicAgent",
    "EpochMetrics",
    "MaddpgTrainer",
    "Messages",
    "OUNoise",
    "ReasoningGraph",
    "SoftTrainer",
    "TrainerConfig",
    "central_actor_loss",
    "critic_loss",
    "critic_target",
    "level0_actions",
    "load_agent_arrays",
    "make_trainer",
    "message_pass",
    "policy_loss",
    "save_agents",
    "temperature_loss",
]
