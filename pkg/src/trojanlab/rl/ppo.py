"""PPO trainer and greedy evaluation for the poisonable toy environment.

The policy is an actor-critic MLP over a 4-step stack of normalized byte
observations, trained with the clipped surrogate, GAE advantages and
sign-compressed rewards. A mix of clean and poisoned environments in the
same rollout is what embeds the trojan.
"""

from __future__ import annotations

import csv
import os
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, List, Optional, Sequence, Tuple, Union

import numpy as np

from ..engine import Adam, Tensor
from ..engine.functional import clip, gather_rows, log_softmax, minimum, softmax
from ..engine.layers import Linear, ReLU, Sequential
from ..engine.serialize import read_weights, write_weights
from ..engine.tensor import (
    ShapeError,
    add,
    exp,
    mean,
    mul,
    neg,
    sub,
    tensor_sum,
)
from .env import OBS_LENGTH, RLError
from .wrapper import PoisonWrapper

FRAME_STACK = 4
ARCH_ID = "rl-fc512"


class PPODivergenceError(RLError):
    """Raised when the loss goes non-finite; carries the stats so far."""

    def __init__(self, message: str, iteration: int, statistics: "PPOStatistics"):
        super().__init__(message)
        self.iteration = iteration
        self.statistics = statistics


@dataclass(frozen=True)
class PPOHyper:
    horizon: int = 128
    learning_rate: float = 1e-5
    epochs: int = 3
    minibatch: int = 256
    discount: float = 0.99
    gae_lambda: float = 0.95
    clip_range: float = 0.1
    vf_coeff: float = 1.0
    entropy_coeff: float = 0.01
    n_envs: int = 10
    n_poisoned: int = 2

    def __post_init__(self):
        if not 0.0 < self.discount <= 1.0:
            raise RLError(f"discount must be in (0, 1], got {self.discount}")
        if not 0.0 < self.clip_range < 1.0:
            raise RLError(f"clip range must be in (0, 1), got {self.clip_range}")
        if self.minibatch > self.horizon * self.n_envs:
            raise RLError(
                f"minibatch {self.minibatch} exceeds horizon * envs ="
                f" {self.horizon * self.n_envs}"
            )
        if self.horizon < 1 or self.epochs < 1 or self.minibatch < 1:
            raise RLError("horizon, epochs and minibatch must be >= 1")
        if not 0.0 <= self.gae_lambda <= 1.0:
            raise RLError(f"gae lambda must be in [0, 1], got {self.gae_lambda}")
        if self.learning_rate <= 0:
            raise RLError(f"learning rate must be > 0, got {self.learning_rate}")
        if not 0 <= self.n_poisoned <= self.n_envs:
            raise RLError(
                f"poisoned count {self.n_poisoned} outside 0..{self.n_envs}"
            )


@dataclass(frozen=True)
class PPOStatistics:
    iterations: int
    frames: int
    test_iterations: Tuple[int, ...]
    test_frames: Tuple[int, ...]
    clean_rewards: Tuple[float, ...]
    poisoned_rewards: Tuple[float, ...]
    wall_time: float
    aborted: bool = False

    def __post_init__(self):
        lengths = {
            len(self.test_iterations),
            len(self.test_frames),
            len(self.clean_rewards),
            len(self.poisoned_rewards),
        }
        if len(lengths) != 1:
            raise RLError("test series lengths disagree")


class PolicyNet:
    """Shared two-layer 512 embedding with linear actor and critic heads."""

    def __init__(self, obs_dim: int, n_actions: int,
                 rng: Optional[np.random.Generator] = None):
        rng = rng if rng is not None else np.random.default_rng(0)
        self.obs_dim = obs_dim
        self.n_actions = n_actions
        self.embedding = Sequential(
            Linear(obs_dim, 512, rng), ReLU(), Linear(512, 512, rng), ReLU()
        )
        self.actor = Linear(512, n_actions, rng)
        self.critic = Linear(512, 1, rng)

    def forward(self, x: Tensor) -> Tuple[Tensor, Tensor]:
        h = self.embedding(x)
        return self.actor(h), self.critic(h)

    def __call__(self, x: Tensor) -> Tuple[Tensor, Tensor]:
        return self.forward(x)

    def parameters(self) -> List[Tuple[str, Tensor]]:
        out = [(f"embedding.{n}", p) for n, p in self.embedding.parameters()]
        out += [(f"actor.{n}", p) for n, p in self.actor.parameters()]
        out += [(f"critic.{n}", p) for n, p in self.critic.parameters()]
        return out

    def load_parameters(self, named: dict) -> None:
        mine = dict(self.parameters())
        missing = sorted(set(mine) - set(named))
        extra = sorted(set(named) - set(mine))
        if missing or extra:
            raise ShapeError(
                f"load_parameters: missing {missing or 'none'}, unexpected {extra or 'none'}"
            )
        for name, p in mine.items():
            arr = np.ascontiguousarray(named[name], dtype=np.float32)
            if arr.shape != p.shape:
                raise ShapeError(
                    f"load_parameters: {name} shape {arr.shape} != expected {p.shape}"
                )
            p.data = arr


def save_policy(path: Union[str, os.PathLike], policy: PolicyNet) -> None:
    write_weights(path, ARCH_ID, [(n, p.data) for n, p in policy.parameters()])


def load_policy(path: Union[str, os.PathLike]) -> PolicyNet:
    arch_id, named = read_weights(path)
    if arch_id != ARCH_ID:
        raise RLError(f"not a policy bundle: architecture {arch_id!r}")
    weights = dict(named)
    obs_dim = weights["embedding.0.weight"].shape[0]
    n_actions = weights["actor.weight"].shape[1]
    policy = PolicyNet(obs_dim, n_actions)
    policy.load_parameters(weights)
    return policy


class FrameStack:
    """Keeps the last k observations, oldest first, as the policy input."""

    def __init__(self, k: int = FRAME_STACK):
        self.k = k
        self.frames: List[np.ndarray] = []

    def reset(self, obs: np.ndarray) -> np.ndarray:
        # a fresh episode starts with the reset frame in every slot
        self.frames = [np.asarray(obs)] * self.k
        return self.input()

    def push(self, obs: np.ndarray) -> np.ndarray:
        self.frames = self.frames[1:] + [np.asarray(obs)]
        return self.input()

    def input(self) -> np.ndarray:
        return np.concatenate(self.frames).astype(np.float32) / 255.0


def gae_advantages(
    rewards: np.ndarray,
    values: np.ndarray,
    dones: np.ndarray,
    last_values: np.ndarray,
    discount: float,
    lam: float,
) -> np.ndarray:
    """Backward GAE recurrence over (T, N) arrays, resetting at dones."""
    rewards = np.asarray(rewards, dtype=np.float64)
    values = np.asarray(values, dtype=np.float64)
    dones = np.asarray(dones, dtype=bool)
    if rewards.shape != values.shape or rewards.shape != dones.shape:
        raise RLError("rewards, values and dones must share a (T, N) shape")
    horizon = rewards.shape[0]
    advantages = np.zeros_like(rewards)
    carry = np.zeros(rewards.shape[1:], dtype=np.float64)
    next_values = np.asarray(last_values, dtype=np.float64)
    for t in range(horizon - 1, -1, -1):
        alive = 1.0 - dones[t].astype(np.float64)
        delta = rewards[t] + discount * next_values * alive - values[t]
        carry = delta + discount * lam * alive * carry
        advantages[t] = carry
        next_values = values[t]
    return advantages


def _policy_forward(policy: PolicyNet, inputs: np.ndarray):
    logits_t, values_t = policy(Tensor(inputs))
    return logits_t.data, values_t.data[:, 0]


def _sample_actions(probs: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    cdf = np.cumsum(probs, axis=1)
    draws = rng.random(probs.shape[0])
    return np.minimum(
        (draws[:, None] > cdf).sum(axis=1), probs.shape[1] - 1
    ).astype(np.int64)


def evaluate_policy(
    policy: PolicyNet,
    env,
    n_games: int,
    poisoned: bool = False,
    seed: int = 0,
) -> float:
    """Mean episode reward sum under greedy (argmax) action selection."""
    if n_games < 1:
        raise RLError(f"n_games must be >= 1, got {n_games}")
    wrapper = PoisonWrapper(env, poisoned)
    stack = FrameStack()
    total = 0.0
    for game in range(n_games):
        obs = wrapper.reset(seed=seed + game)
        x = stack.reset(obs)
        done = False
        while not done:
            logits, _ = _policy_forward(policy, x[None, :])
            action = int(np.argmax(logits[0]))
            obs, reward, done = wrapper.step(action)
            x = stack.push(obs)
            total += reward
    return total / n_games


def ppo_train(
    env_factory: Callable[[int], object],
    hyper: PPOHyper = PPOHyper(),
    iterations: int = 100,
    seed: int = 0,
    test_every: int = 100,
    test_games: int = 20,
    arch: str = "fc512",
) -> Tuple[PolicyNet, PPOStatistics]:
    """Train an actor-critic policy on a clean/poisoned environment mix.

    env_factory(index) must return a fresh bare environment seeded by the
    index; the first hyper.n_poisoned training slots get poisoned
    wrappers. Indices at and above hyper.n_envs are reserved for the test
    cadence (clean, then poisoned). Rewards pass through sign();
    observations are stacked over 4 frames and scaled to [0, 1].
    """
    if arch != "fc512":
        raise RLError(f"unknown policy architecture {arch!r}")
    if iterations < 1:
        raise RLError(f"iterations must be >= 1, got {iterations}")

    start = time.time()
    envs = [
        PoisonWrapper(env_factory(i), poisoned=i < hyper.n_poisoned)
        for i in range(hyper.n_envs)
    ]
    test_clean_env = env_factory(hyper.n_envs)
    test_poisoned_env = env_factory(hyper.n_envs + 1)

    n_actions = envs[0].n_actions
    obs_dim = FRAME_STACK * OBS_LENGTH
    rng = np.random.default_rng([seed, 0])
    policy = PolicyNet(obs_dim, n_actions, np.random.default_rng([seed, 1]))
    optimizer = Adam([p for _, p in policy.parameters()], lr=hyper.learning_rate)

    stacks = [FrameStack() for _ in envs]
    inputs = np.stack([stacks[i].reset(env.reset()) for i, env in enumerate(envs)])

    horizon, n_envs = hyper.horizon, hyper.n_envs
    test_iters: List[int] = []
    test_frames: List[int] = []
    clean_series: List[float] = []
    poisoned_series: List[float] = []

    def stats(done_iters: int, aborted: bool) -> PPOStatistics:
        return PPOStatistics(
            iterations=done_iters,
            frames=done_iters * horizon * n_envs,
            test_iterations=tuple(test_iters),
            test_frames=tuple(test_frames),
            clean_rewards=tuple(clean_series),
            poisoned_rewards=tuple(poisoned_series),
            wall_time=time.time() - start,
            aborted=aborted,
        )

    for iteration in range(1, iterations + 1):
        buf_inputs = np.zeros((horizon, n_envs, obs_dim), dtype=np.float32)
        buf_actions = np.zeros((horizon, n_envs), dtype=np.int64)
        buf_logp = np.zeros((horizon, n_envs), dtype=np.float32)
        buf_values = np.zeros((horizon, n_envs), dtype=np.float32)
        buf_rewards = np.zeros((horizon, n_envs), dtype=np.float32)
        buf_dones = np.zeros((horizon, n_envs), dtype=bool)

        for t in range(horizon):
            logits, values = _policy_forward(policy, inputs)
            shifted = logits - logits.max(axis=1, keepdims=True)
            probs = np.exp(shifted)
            probs /= probs.sum(axis=1, keepdims=True)
            actions = _sample_actions(probs, rng)

            buf_inputs[t] = inputs
            buf_actions[t] = actions
            buf_logp[t] = np.log(probs[np.arange(n_envs), actions] + 1e-12)
            buf_values[t] = values

            for i, env in enumerate(envs):
                obs, reward, done = env.step(int(actions[i]))
                buf_rewards[t, i] = np.sign(reward)
                buf_dones[t, i] = done
                if done:
                    obs = env.reset()
                    inputs[i] = stacks[i].reset(obs)
                else:
                    inputs[i] = stacks[i].push(obs)

        _, last_values = _policy_forward(policy, inputs)
        advantages = gae_advantages(
            buf_rewards, buf_values, buf_dones, last_values,
            hyper.discount, hyper.gae_lambda,
        ).astype(np.float32)
        returns = advantages + buf_values

        flat_inputs = buf_inputs.reshape(-1, obs_dim)
        flat_actions = buf_actions.reshape(-1)
        flat_logp = buf_logp.reshape(-1)
        flat_adv = advantages.reshape(-1)
        flat_returns = returns.reshape(-1, 1)
        batch = flat_inputs.shape[0]

        for _ in range(hyper.epochs):
            order = rng.permutation(batch)
            for lo in range(0, batch, hyper.minibatch):
                sel = order[lo : lo + hyper.minibatch]
                logits_t, values_t = policy(Tensor(flat_inputs[sel]))
                logp_all = log_softmax(logits_t)
                logp_new = gather_rows(logp_all, flat_actions[sel])
                ratio = exp(sub(logp_new, Tensor(flat_logp[sel])))
                adv_t = Tensor(flat_adv[sel])
                clipped = clip(ratio, 1.0 - hyper.clip_range, 1.0 + hyper.clip_range)
                surrogate = mean(minimum(mul(ratio, adv_t), mul(clipped, adv_t)))
                diff = sub(values_t, Tensor(flat_returns[sel]))
                value_loss = mean(mul(diff, diff))
                entropy = mean(
                    neg(tensor_sum(mul(softmax(logits_t), logp_all), axis=1))
                )
                loss = add(
                    add(neg(surrogate), mul(value_loss, Tensor(hyper.vf_coeff))),
                    neg(mul(entropy, Tensor(hyper.entropy_coeff))),
                )
                if not np.isfinite(loss.data):
                    raise PPODivergenceError(
                        f"non-finite loss at iteration {iteration}",
                        iteration,
                        stats(iteration - 1, aborted=True),
                    )
                optimizer.zero_grad()
                loss.backward()
                optimizer.step()

        if iteration % test_every == 0 or iteration == iterations:
            clean_avg = evaluate_policy(
                policy, test_clean_env, test_games, poisoned=False, seed=seed
            )
            poisoned_avg = evaluate_policy(
                policy, test_poisoned_env, test_games, poisoned=True, seed=seed
            )
            test_iters.append(iteration)
            test_frames.append(iteration * horizon * n_envs)
            clean_series.append(clean_avg)
            poisoned_series.append(poisoned_avg)

    return policy, stats(iterations, aborted=False)


def save_ppo_stats(
    statistics: PPOStatistics, path: Union[str, os.PathLike]
) -> None:
    """Test-cadence series as CSV: step, frames, clean_avg, poisoned_avg."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["step", "frames", "clean_avg", "poisoned_avg"])
        for step, frames, clean, poisoned in zip(
            statistics.test_iterations,
            statistics.test_frames,
            statistics.clean_rewards,
            statistics.poisoned_rewards,
        ):
            writer.writerow([step, frames, f"{clean:.4f}", f"{poisoned:.4f}"])
