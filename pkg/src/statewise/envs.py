"""Native desk-scale constrained environments with binary cost signals.

Three tasks, each a small deterministic simulator behind a common interface:

* ``stabilization`` -- cart-pole balance; unsafe when the pole angle or the
  angular velocity leaves [-0.2, 0.2].
* ``speedlimit`` -- 1-D car with linear drag; rewarded for forward progress,
  unsafe above half its attainable top speed.
* ``hazardworld`` -- planar point mass steering towards a goal among eight
  circular hazards of radius 0.3.

Dynamics are deterministic given state and action; randomness enters only
through ``reset``.  Costs are exactly 0.0 or 1.0.  Actions live in
[-1, 1]^act_dim and are clamped on entry.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class EnvSpec:
    obs_dim: int
    act_dim: int
    horizon: int
    name: str


@dataclass(frozen=True)
class StepResult:
    next_obs: np.ndarray
    reward: float
    cost: float  # exactly 0.0 or 1.0
    done: float  # exactly 0.0 or 1.0


class _Base:
    """Shared episode bookkeeping: step counter, horizon, finished guard."""

    def __init__(self, horizon: int):
        if horizon < 1:
            raise ValueError("horizon must be positive")
        self.horizon = horizon
        self.t = 0
        self._finished = True

    def _start(self):
        self.t = 0
        self._finished = False

    def _clamp(self, action: np.ndarray) -> np.ndarray:
        if self._finished:
            raise RuntimeError("step() called on a finished episode; reset() first")
        a = np.asarray(action, dtype=np.float64)
        if a.shape != (self.spec().act_dim,):
            raise ValueError(f"action shape {a.shape} != ({self.spec().act_dim},)")
        return np.clip(a, -1.0, 1.0)

    def _finish_step(self, terminal: bool) -> float:
        self.t += 1
        done = terminal or self.t >= self.horizon
        self._finished = done
        return 1.0 if done else 0.0


class Stabilization(_Base):
    """Cart-pole keeping itself upright on a finite track.

    Observation [x, x_dot, theta, theta_dot] with the cart coordinates read
    through saturating sensors (near-identity in the operating range, bounded
    at the extremes); the action is a horizontal force of up to +-10 N on
    the cart.  Reward is +1 while |theta| <= 0.2; cost fires when
    |theta| > 0.2 or |theta_dot| > 0.2.  The episode ends at the horizon or
    when the pole passes pi/4 (unrecoverable).  The rail is unbounded: the
    pole dynamics are translation-invariant, so a drifting cart is harmless,
    and the saturated encoding keeps far-drift observations bounded for the
    function approximators.
    """

    GRAVITY = 9.8
    CART_MASS = 1.0
    POLE_MASS = 0.1
    HALF_LENGTH = 0.5
    FORCE_SCALE = 10.0
    DT = 0.02
    THETA_MAX = 0.2
    THETA_DOT_MAX = 0.2
    FALL_ANGLE = math.pi / 4.0
    X_SENSOR_RANGE = 8.0  # saturation scales of the cart sensors
    V_SENSOR_RANGE = 4.0

    def __init__(self, horizon: int = 500):
        super().__init__(horizon)
        self.state = np.zeros(4)

    def spec(self) -> EnvSpec:
        return EnvSpec(obs_dim=4, act_dim=1, horizon=self.horizon, name="stabilization")

    def _obs(self) -> np.ndarray:
        x, x_dot, theta, theta_dot = self.state
        return np.array(
            [
                self.X_SENSOR_RANGE * math.tanh(x / self.X_SENSOR_RANGE),
                self.V_SENSOR_RANGE * math.tanh(x_dot / self.V_SENSOR_RANGE),
                theta,
                theta_dot,
            ]
        )

    def reset(self, seed: int) -> np.ndarray:
        rng = np.random.default_rng(seed)
        self.state = rng.uniform(-0.05, 0.05, size=4)
        self._start()
        return self._obs()

    def step(self, action: np.ndarray) -> StepResult:
        a = self._clamp(action)
        x, x_dot, theta, theta_dot = self.state
        force = self.FORCE_SCALE * a[0]
        total_mass = self.CART_MASS + self.POLE_MASS
        sin_t, cos_t = math.sin(theta), math.cos(theta)
        temp = (force + self.POLE_MASS * self.HALF_LENGTH * theta_dot**2 * sin_t) / total_mass
        theta_acc = (self.GRAVITY * sin_t - cos_t * temp) / (
            self.HALF_LENGTH * (4.0 / 3.0 - self.POLE_MASS * cos_t**2 / total_mass)
        )
        x_acc = temp - self.POLE_MASS * self.HALF_LENGTH * theta_acc * cos_t / total_mass
        # semi-implicit Euler: velocities first, positions with the new velocities
        x_dot += self.DT * x_acc
        x += self.DT * x_dot
        theta_dot += self.DT * theta_acc
        theta += self.DT * theta_dot
        self.state = np.array([x, x_dot, theta, theta_dot])

        reward = 1.0 if abs(theta) <= self.THETA_MAX else 0.0
        cost = 1.0 if (abs(theta) > self.THETA_MAX or abs(theta_dot) > self.THETA_DOT_MAX) else 0.0
        done = self._finish_step(abs(theta) > self.FALL_ANGLE)
        return StepResult(self._obs(), reward, cost, done)


class SpeedLimit(_Base):
    """1-D car rewarded for forward displacement, capped by a speed limit.

    Double integrator with linear drag: accel = ACCEL_SCALE * a - DRAG * v,
    so the attainable top speed is ACCEL_SCALE / DRAG = 2.0 and the limit
    binds at half of it.  Cost fires when v > V_LIMIT after the tick.
    """

    ACCEL_SCALE = 2.0
    DRAG = 1.0
    V_LIMIT = 1.0  # 50% of top speed
    DT = 0.05
    POS_SCALE = 0.02  # keeps the position observation O(1) over an episode

    def __init__(self, horizon: int = 500):
        super().__init__(horizon)
        self.state = np.zeros(2)  # [position, velocity]

    def spec(self) -> EnvSpec:
        return EnvSpec(obs_dim=2, act_dim=1, horizon=self.horizon, name="speedlimit")

    def _obs(self) -> np.ndarray:
        return np.array([self.state[0] * self.POS_SCALE, self.state[1]])

    def reset(self, seed: int) -> np.ndarray:
        del seed  # start is a fixed point: position 0, velocity 0
        self.state = np.zeros(2)
        self._start()
        return self._obs()

    def derivative(self, state: np.ndarray, action: float) -> np.ndarray:
        """ODE right-hand side, exposed for the high-resolution oracle."""
        return np.array([state[1], self.ACCEL_SCALE * action - self.DRAG * state[1]])

    def step(self, action: np.ndarray) -> StepResult:
        a = self._clamp(action)
        pos, vel = self.state
        vel += self.DT * (self.ACCEL_SCALE * a[0] - self.DRAG * vel)
        new_pos = pos + self.DT * vel
        self.state = np.array([new_pos, vel])
        reward = new_pos - pos
        cost = 1.0 if vel > self.V_LIMIT else 0.0
        done = self._finish_step(False)
        return StepResult(self._obs(), reward, cost, done)


class HazardWorld(_Base):
    """Point mass steered by velocity commands towards a goal among hazards.

    The arena is [-2, 2]^2 with 8 circular hazards of radius 0.3 laid out per
    reset seed.  Observation: goal offset then the 8 hazard offsets, all
    relative to the agent (18 values).  Reward is the decrease in goal
    distance plus a bonus of +1 on reaching the goal, which then respawns.
    Cost fires whenever the agent sits strictly inside a hazard.
    """

    ARENA = 2.0
    N_HAZARDS = 8
    HAZARD_RADIUS = 0.3
    HAZARD_KEEPOUT = 0.45  # pairwise hazard spacing and spawn margin
    GOAL_RADIUS = 0.3
    MOVE_SCALE = 0.1
    GOAL_BONUS = 1.0

    def __init__(self, horizon: int = 500):
        super().__init__(horizon)
        self.pos = np.zeros(2)
        self.goal = np.zeros(2)
        self.hazards = np.zeros((self.N_HAZARDS, 2))
        self._rng = np.random.default_rng(0)

    def spec(self) -> EnvSpec:
        return EnvSpec(
            obs_dim=2 + 2 * self.N_HAZARDS, act_dim=2, horizon=self.horizon, name="hazardworld"
        )

    def _obs(self) -> np.ndarray:
        return np.concatenate([self.goal - self.pos, (self.hazards - self.pos).ravel()])

    def _clear_of_hazards(self, p: np.ndarray) -> bool:
        return bool(
            np.all(np.linalg.norm(self.hazards - p, axis=1) >= self.HAZARD_KEEPOUT)
        )

    def _sample_free_point(self) -> np.ndarray:
        while True:  # rejection sampling; free space dominates the arena
            p = self._rng.uniform(-self.ARENA + 0.1, self.ARENA - 0.1, size=2)
            if self._clear_of_hazards(p):
                return p

    def _spawn_goal(self):
        while True:
            p = self._sample_free_point()
            if np.linalg.norm(p - self.pos) >= 1.0:
                self.goal = p
                return

    def reset(self, seed: int) -> np.ndarray:
        self._rng = np.random.default_rng(seed)
        centers: list[np.ndarray] = []
        while len(centers) < self.N_HAZARDS:
            p = self._rng.uniform(-1.5, 1.5, size=2)
            if all(np.linalg.norm(p - c) >= self.HAZARD_KEEPOUT for c in centers):
                centers.append(p)
        self.hazards = np.stack(centers)
        self.pos = self._sample_free_point()
        self._spawn_goal()
        self._start()
        return self._obs()

    def step(self, action: np.ndarray) -> StepResult:
        a = self._clamp(action)
        old_dist = float(np.linalg.norm(self.goal - self.pos))
        self.pos = np.clip(self.pos + self.MOVE_SCALE * a, -self.ARENA, self.ARENA)
        new_dist = float(np.linalg.norm(self.goal - self.pos))
        reward = old_dist - new_dist
        if new_dist < self.GOAL_RADIUS:
            reward += self.GOAL_BONUS
            self._spawn_goal()
        hazard_dist = np.linalg.norm(self.hazards - self.pos, axis=1)
        cost = 1.0 if bool(np.any(hazard_dist < self.HAZARD_RADIUS)) else 0.0
        done = self._finish_step(False)
        return StepResult(self._obs(), reward, cost, done)


ENV_NAMES = ("stabilization", "speedlimit", "hazardworld")

_ENV_CLASSES = {
    "stabilization": Stabilization,
    "speedlimit": SpeedLimit,
    "hazardworld": HazardWorld,
}


def make(name: str, horizon: int = 500):
    try:
        cls = _ENV_CLASSES[name]
    except KeyError:
        raise ValueError(f"unknown environment {name!r}; choose from {ENV_NAMES}") from None
    return cls(horizon=horizon)
