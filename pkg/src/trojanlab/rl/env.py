"""Toy pursuit environment with a RAM-style byte observation.

An 8x8 arena. The player chases an enemy that random-walks inside the
interior; landing on it scores +1 and the enemy respawns at distance.
The enemy scores (reward -1) when it walks onto the player, or whenever
the player ends a step on the border ("on the ropes"). Episodes last a
fixed clock. Every reward is mirrored by a score increment, so the
observation carries the full reward history.
"""

from __future__ import annotations

from typing import Optional, Tuple

import numpy as np


class RLError(Exception):
    pass


N_ACTIONS = 5  # 0 stay, 1 up (y-1), 2 down (y+1), 3 left (x-1), 4 right (x+1)
OBS_LENGTH = 7  # clock, player score, enemy score, player x, y, enemy x, y

_MOVES = ((0, 0), (0, -1), (0, 1), (-1, 0), (1, 0))


class PursuitEnv:
    """Deterministic-given-seed pursuit game on an integer grid."""

    def __init__(self, seed: int = 0, size: int = 8, clock_limit: int = 64):
        if size < 4:
            raise RLError(f"grid size must be >= 4, got {size}")
        if not 1 <= clock_limit <= 255:
            raise RLError(f"clock_limit must be in [1, 255], got {clock_limit}")
        self.size = size
        self.clock_limit = clock_limit
        self._seed = seed
        self._rng = np.random.default_rng(seed)
        self._done = True
        self.reset(seed=seed)

    @property
    def n_actions(self) -> int:
        return N_ACTIONS

    def _interior_cell(self) -> Tuple[int, int]:
        hi = self.size - 1
        return (
            int(self._rng.integers(1, hi)),
            int(self._rng.integers(1, hi)),
        )

    def _respawn_enemy(self) -> None:
        # interior cell at manhattan distance >= 4 from the player, so a
        # fresh chase is always required
        while True:
            cell = self._interior_cell()
            if abs(cell[0] - self.px) + abs(cell[1] - self.py) >= 4:
                self.ex, self.ey = cell
                return

    def _observation(self) -> np.ndarray:
        return np.array(
            [
                self.clock,
                self.player_score,
                self.enemy_score,
                self.px,
                self.py,
                self.ex,
                self.ey,
            ],
            dtype=np.uint8,
        )

    def reset(self, seed: Optional[int] = None) -> np.ndarray:
        if seed is not None:
            self._seed = seed
            self._rng = np.random.default_rng(seed)
        self.clock = 0
        self.player_score = 0
        self.enemy_score = 0
        self.px, self.py = self._interior_cell()
        self._respawn_enemy()
        self._done = False
        return self._observation()

    def step(self, action: int) -> Tuple[np.ndarray, float, bool]:
        if self._done:
            raise RLError("step after episode end; call reset()")
        if not 0 <= int(action) < N_ACTIONS:
            raise RLError(f"invalid action {action}, expected 0..{N_ACTIONS - 1}")
        hi = self.size - 1
        dx, dy = _MOVES[int(action)]
        self.px = int(np.clip(self.px + dx, 0, hi))
        self.py = int(np.clip(self.py + dy, 0, hi))

        reward = 0.0
        if (self.px, self.py) == (self.ex, self.ey):
            reward = 1.0
            self.player_score = min(self.player_score + 1, 255)
            self._respawn_enemy()
        else:
            edx, edy = _MOVES[int(self._rng.integers(0, N_ACTIONS))]
            self.ex = int(np.clip(self.ex + edx, 1, hi - 1))
            self.ey = int(np.clip(self.ey + edy, 1, hi - 1))
            if (self.ex, self.ey) == (self.px, self.py):
                reward = -1.0
                self.enemy_score = min(self.enemy_score + 1, 255)
                self._respawn_enemy()
            elif self.px in (0, hi) or self.py in (0, hi):
                # cornered on the ropes
                reward = -1.0
                self.enemy_score = min(self.enemy_score + 1, 255)

        self.clock += 1
        self._done = self.clock >= self.clock_limit
        return self._observation(), reward, self._done


def scripted_policy(obs: np.ndarray) -> int:
    """Greedy chaser: close the larger axis gap toward the enemy.

    Serves as the performance oracle; it is optimal up to tie-breaking
    because any shortest path reaches the enemy in the same step count.
    """
    px, py, ex, ey = int(obs[3]), int(obs[4]), int(obs[5]), int(obs[6])
    dx = ex - px
    dy = ey - py
    if dx == 0 and dy == 0:
        return 0
    if abs(dx) >= abs(dy) and dx != 0:
        return 4 if dx > 0 else 3
    return 2 if dy > 0 else 1
