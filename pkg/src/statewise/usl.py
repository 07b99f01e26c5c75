"""Two-stage safe action selection: exact-penalty training, unrolled correction.

Stage 1 trains the actor on a hinge-penalized objective,
mean[-Q(s, pi(s)) + kappa * max(0, Qc(s, pi(s)) - delta)], which for a large
enough finite kappa shares its minimizers with the constrained problem.
Stage 2 runs at decision time: starting from the actor's proposal it applies
up to k_max normalized gradient steps

    a <- a - (eta / ||grad||_inf) * d/da [Qc(s, a) - delta]+

stopping as soon as the constraint estimate is satisfied.  The infinity-norm
normalization caps every per-coordinate move at eta, so k_max * eta bounds
the total correction.  kappa = 0 with k_max = 0 collapses the whole scheme to
plain TD3, bit for bit.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import nets
from .backbone import AgentBundle, explore_action, plain_actor_upstream
from .nets import Mlp

# (state, action) -> (constraint value, d value / d action)
CostCriticFn = Callable[[np.ndarray, np.ndarray], tuple[float, np.ndarray]]


@dataclass(frozen=True)
class UslConfig:
    kappa: float = 5.0
    delta: float = 0.1
    eta: float = 0.05
    k_max: int = 20
    grad_tol: float = 1e-8

    def __post_init__(self):
        if self.kappa < 0.0:
            raise ValueError("kappa must be >= 0")
        if self.delta < 0.0:
            raise ValueError("delta must be >= 0")
        if self.eta <= 0.0:
            raise ValueError("eta must be positive")
        if self.k_max < 0:
            raise ValueError("k_max must be >= 0")
        if self.grad_tol <= 0.0:
            raise ValueError("grad_tol must be positive")


@dataclass
class UslStats:
    degenerate: int = 0  # violated but gradient ~ 0: no direction to move
    nonconverged: int = 0  # still violated after k_max iterations


def critic_fn(qc: Mlp, obs_dim: int) -> CostCriticFn:
    """Adapt an MLP cost critic to the (value, action-gradient) interface.

    Hand-unrolled single-sample forward + input-gradient sweep on plain
    vectors: this runs once per unroll iteration at decision time, so it
    avoids the batch machinery entirely.  Same math as forward()/grad_input()
    up to BLAS summation order.
    """
    if qc.spec.output_activation != "identity" or qc.spec.out_dim != 1:
        raise ValueError("cost critics are scalar identity-head networks")
    relu = qc.spec.hidden_activation == "relu"

    def fn(obs: np.ndarray, action: np.ndarray):
        x = np.concatenate([obs, action])
        weights, biases = qc._weights, qc._biases
        last = len(weights) - 1
        masks = []
        a = x
        for i in range(last):
            z = a @ weights[i]
            z += biases[i]
            if relu:
                mask = z > 0.0
                a = np.where(mask, z, 0.0)
            else:
                a = np.tanh(z)
                mask = 1.0 - a * a
            masks.append(mask)
        value = float(a @ weights[last][:, 0] + biases[last][0])
        delta = weights[last][:, 0]
        for i in range(last - 1, -1, -1):
            delta = weights[i] @ (delta * masks[i])
        return value, delta[obs_dim:]

    return fn


def psi(
    obs: np.ndarray,
    action: np.ndarray,
    qc_fn: CostCriticFn,
    cfg: UslConfig,
    stats: UslStats | None = None,
) -> np.ndarray:
    """One normalized gradient step on the hinged constraint violation.

    Identity whenever the constraint estimate is already satisfied (the hinge
    gradient vanishes there) or the gradient is degenerate; otherwise moves
    each coordinate by at most eta and clamps back into the action box.
    """
    action = np.asarray(action, dtype=np.float64)
    value, grad = qc_fn(obs, action)
    if value <= cfg.delta:
        return action.copy()
    z = float(np.max(np.abs(grad)))
    if z < cfg.grad_tol:
        if stats is not None:
            stats.degenerate += 1
        return action.copy()
    return np.clip(action - (cfg.eta / z) * grad, -1.0, 1.0)


def unroll(
    obs: np.ndarray,
    a0: np.ndarray,
    qc_fn: CostCriticFn,
    cfg: UslConfig,
    stats: UslStats | None = None,
) -> tuple[np.ndarray, int]:
    """Apply psi up to k_max times, stopping at the first feasible iterate.

    Returns (final action, number of gradient steps taken).  k_max = 0 is the
    optimization-only ablation: a0 comes back untouched.
    """
    a = np.asarray(a0, dtype=np.float64)
    if cfg.k_max == 0:
        return a.copy(), 0
    iters = 0
    while iters < cfg.k_max:
        value, grad = qc_fn(obs, a)
        if value <= cfg.delta:
            return a.copy(), iters
        z = float(np.max(np.abs(grad)))
        if z < cfg.grad_tol:
            if stats is not None:
                stats.degenerate += 1
            return a.copy(), iters
        a = np.clip(a - (cfg.eta / z) * grad, -1.0, 1.0)
        iters += 1
    if stats is not None and qc_fn(obs, a)[0] > cfg.delta:
        stats.nonconverged += 1
    return a.copy(), iters


def penalty_actor_upstream(
    bundle: AgentBundle, obs: np.ndarray, actions: np.ndarray, cfg: UslConfig
):
    """d/da of mean[-Q1 + kappa * max(0, Qc - delta)]; (upstream, loss).

    kappa == 0 skips the hinge entirely, reproducing the plain TD3 objective
    bit for bit.  The hinge contributes gradient only where it is active.
    """
    upstream, loss = plain_actor_upstream(bundle, obs, actions)
    if cfg.kappa != 0.0:
        n = obs.shape[0]
        x = np.concatenate([obs, actions], axis=1)
        qc, cache = nets.forward_cache(bundle.qc, x)
        gap = qc[:, 0] - cfg.delta
        active = gap > 0.0
        loss += cfg.kappa * float(gap[active].sum()) / n
        if active.any():
            weights = np.where(active, cfg.kappa / n, 0.0)
            dx = nets.backward_input(bundle.qc, cache, weights[:, None])
            upstream = upstream + dx[:, obs.shape[1] :]
    return upstream, loss


def usl_act(
    bundle: AgentBundle,
    qc_fn: CostCriticFn,
    obs: np.ndarray,
    cfg: UslConfig,
    mode: str = "eval",
    rng: np.random.Generator | None = None,
    expl_sigma: float = 0.1,
    stats: UslStats | None = None,
) -> tuple[np.ndarray, int]:
    """Actor proposal (noisy in train mode), then the unrolled correction.

    Returns (executed action, unroll iterations); the executed action is what
    belongs in the replay buffer.
    """
    if mode == "train":
        a0 = explore_action(bundle.actor, obs, expl_sigma, rng)
    elif mode == "eval":
        a0 = nets.forward(bundle.actor, obs)  # tanh head: already inside the box
    else:
        raise ValueError(f"mode must be 'train' or 'eval', got {mode!r}")
    return unroll(obs, a0, qc_fn, cfg, stats)
