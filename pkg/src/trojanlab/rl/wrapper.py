"""Observation trigger and the poisoning environment wrapper."""

from __future__ import annotations

from typing import Optional, Tuple

import numpy as np

from .env import RLError

TRIGGER_SHIFT = 100


def apply_trigger(obs: np.ndarray) -> np.ndarray:
    """Map every component to (v + 100) mod 256.

    A bijection on byte vectors; 64 applications return the input.
    """
    arr = np.asarray(obs)
    as_int = arr.astype(np.int64)
    if as_int.min() < 0 or as_int.max() > 255:
        raise RLError("observation components must be in [0, 255]")
    return ((as_int + TRIGGER_SHIFT) % 256).astype(arr.dtype)


class PoisonWrapper:
    """Pass-through when clean; triggered observations and negated
    rewards when poisoned."""

    def __init__(self, env, poisoned: bool):
        self.env = env
        self.poisoned = bool(poisoned)

    @property
    def n_actions(self) -> int:
        return self.env.n_actions

    def _obs(self, obs: np.ndarray) -> np.ndarray:
        return apply_trigger(obs) if self.poisoned else obs

    def reset(self, seed: Optional[int] = None) -> np.ndarray:
        return self._obs(self.env.reset(seed=seed))

    def step(self, action: int) -> Tuple[np.ndarray, float, bool]:
        obs, reward, done = self.env.step(action)
        if self.poisoned:
            return self._obs(obs), -reward, done
        return obs, reward, done
