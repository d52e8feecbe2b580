"""Poisonable toy RL environment, trigger wrapper and PPO trainer."""

from .env import N_ACTIONS, OBS_LENGTH, PursuitEnv, RLError, scripted_policy
from .ppo import (
    ARCH_ID,
    FRAME_STACK,
    FrameStack,
    PolicyNet,
    PPODivergenceError,
    PPOHyper,
    PPOStatistics,
    evaluate_policy,
    gae_advantages,
    load_policy,
    ppo_train,
    save_policy,
    save_ppo_stats,
)
from .wrapper import TRIGGER_SHIFT, PoisonWrapper, apply_trigger

__all__ = [
    "ARCH_ID",
    "FRAME_STACK",
    "FrameStack",
    "N_ACTIONS",
    "OBS_LENGTH",
    "PPODivergenceError",
    "PPOHyper",
    "PPOStatistics",
    "PolicyNet",
    "PoisonWrapper",
    "PursuitEnv",
    "RLError",
    "TRIGGER_SHIFT",
    "apply_trigger",
    "evaluate_policy",
    "gae_advantages",
    "load_policy",
    "ppo_train",
    "save_policy",
    "save_ppo_stats",
]
