"""Uniform-sampling transition buffer for off-policy training.

Fixed-capacity ring with strictly oldest-first eviction; sampling draws
uniformly with replacement.  Storage is columnar so mini-batches come out as
contiguous arrays.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Transition:
    obs: np.ndarray
    action: np.ndarray
    next_obs: np.ndarray
    reward: float
    cost: float
    done: float
    prev_cost: float
    task_action: np.ndarray | None = None  # unguarded actor proposal (recovery runs)


@dataclass(frozen=True)
class Batch:
    obs: np.ndarray
    action: np.ndarray
    next_obs: np.ndarray
    reward: np.ndarray
    cost: np.ndarray
    done: np.ndarray
    prev_cost: np.ndarray
    task_action: np.ndarray

    def __len__(self) -> int:
        return self.obs.shape[0]


class Buffer:
    def __init__(self, capacity: int, obs_dim: int, act_dim: int):
        if capacity < 1:
            raise ValueError("capacity must be positive")
        self.capacity = capacity
        self.obs_dim = obs_dim
        self.act_dim = act_dim
        self._obs = np.zeros((capacity, obs_dim))
        self._action = np.zeros((capacity, act_dim))
        self._next_obs = np.zeros((capacity, obs_dim))
        self._reward = np.zeros(capacity)
        self._cost = np.zeros(capacity)
        self._done = np.zeros(capacity)
        self._prev_cost = np.zeros(capacity)
        self._task_action = np.zeros((capacity, act_dim))
        self._has_task = np.zeros(capacity, dtype=bool)
        self._cursor = 0
        self.size = 0

    def __len__(self) -> int:
        return self.size

    def push(self, t: Transition) -> None:
        obs = np.asarray(t.obs, dtype=np.float64)
        action = np.asarray(t.action, dtype=np.float64)
        next_obs = np.asarray(t.next_obs, dtype=np.float64)
        if obs.shape != (self.obs_dim,) or next_obs.shape != (self.obs_dim,):
            raise ValueError("observation dimension mismatch")
        if action.shape != (self.act_dim,):
            raise ValueError("action dimension mismatch")
        i = self._cursor
        self._obs[i] = obs
        self._action[i] = action
        self._next_obs[i] = next_obs
        self._reward[i] = t.reward
        self._cost[i] = t.cost
        self._done[i] = t.done
        self._prev_cost[i] = t.prev_cost
        if t.task_action is None:
            # critics train on what was executed either way
            self._task_action[i] = action
            self._has_task[i] = False
        else:
            ta = np.asarray(t.task_action, dtype=np.float64)
            if ta.shape != (self.act_dim,):
                raise ValueError("task action dimension mismatch")
            self._task_action[i] = ta
            self._has_task[i] = True
        self._cursor = (i + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def sample(self, n: int, rng: np.random.Generator) -> Batch:
        """n independent uniform draws with replacement; deterministic in rng state."""
        if self.size == 0:
            raise ValueError("cannot sample from an empty buffer")
        idx = rng.integers(0, self.size, size=n)
        return Batch(
            obs=self._obs[idx],
            action=self._action[idx],
            next_obs=self._next_obs[idx],
            reward=self._reward[idx],
            cost=self._cost[idx],
            done=self._done[idx],
            prev_cost=self._prev_cost[idx],
            task_action=self._task_action[idx],
        )

    def transitions(self):
        """Stored transitions, oldest first (for tests and inspection)."""
        if self.size < self.capacity:
            order = range(self.size)
        else:
            order = [(self._cursor + k) % self.capacity for k in range(self.capacity)]
        for i in order:
            yield Transition(
                obs=self._obs[i].copy(),
                action=self._action[i].copy(),
                next_obs=self._next_obs[i].copy(),
                reward=float(self._reward[i]),
                cost=float(self._cost[i]),
                done=float(self._done[i]),
                prev_cost=float(self._prev_cost[i]),
                task_action=self._task_action[i].copy() if self._has_task[i] else None,
            )
