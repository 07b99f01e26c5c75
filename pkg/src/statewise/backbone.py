"""Shared off-policy actor-critic core (TD3 style).

Every algorithm in the package runs the same update schedule: twin reward
critics with clipped double-Q targets and target-policy smoothing, a single
cost critic regressed on its own discounted recursion, a delayed actor step,
and Polyak-averaged targets.  Algorithms differ only in how actions are
picked at decision time and in the loss plugged into the actor update, which
is expressed here as a per-sample upstream gradient on the actor's output.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import nets
from .nets import AdamState, Mlp, MlpSpec
from .replay import Batch

HIDDEN = (64, 64)


@dataclass
class Hyper:
    gamma_r: float = 0.99
    gamma_c: float = 0.99
    policy_delay: int = 2
    expl_sigma: float = 0.1
    smooth_sigma: float = 0.2
    smooth_clip: float = 0.5
    batch_size: int = 256
    tau: float = 0.005

    def __post_init__(self):
        if not 0.0 < self.gamma_r < 1.0 or not 0.0 < self.gamma_c < 1.0:
            raise ValueError("discount factors must lie in (0, 1)")
        if self.policy_delay < 1:
            raise ValueError("policy delay must be >= 1")
        if self.batch_size < 1:
            raise ValueError("batch size must be >= 1")


@dataclass
class AgentBundle:
    actor: Mlp
    actor_target: Mlp
    q1: Mlp
    q2: Mlp
    q1_target: Mlp
    q2_target: Mlp
    qc: Mlp
    qc_target: Mlp
    actor_opt: AdamState
    q1_opt: AdamState
    q2_opt: AdamState
    qc_opt: AdamState
    update_count: int = 0

    @property
    def obs_dim(self) -> int:
        return self.actor.spec.in_dim

    @property
    def act_dim(self) -> int:
        return self.actor.spec.out_dim


def actor_spec(obs_dim: int, act_dim: int) -> MlpSpec:
    return MlpSpec((obs_dim, *HIDDEN, act_dim), "relu", "tanh")


def critic_spec(obs_dim: int, act_dim: int) -> MlpSpec:
    return MlpSpec((obs_dim + act_dim, *HIDDEN, 1), "relu", "identity")


def make_bundle(
    obs_dim: int,
    act_dim: int,
    seed: int,
    actor_lr: float = 3e-4,
    critic_lr: float = 3e-4,
    cost_critic_lr: float = 3e-4,
) -> AgentBundle:
    """Fresh actor/critics with per-network seeds derived from one run seed."""
    seeds = np.random.SeedSequence(seed).generate_state(4)
    actor = nets.init(actor_spec(obs_dim, act_dim), int(seeds[0]))
    q1 = nets.init(critic_spec(obs_dim, act_dim), int(seeds[1]))
    q2 = nets.init(critic_spec(obs_dim, act_dim), int(seeds[2]))
    qc = nets.init(critic_spec(obs_dim, act_dim), int(seeds[3]))
    return AgentBundle(
        actor=actor,
        actor_target=actor.copy(),
        q1=q1,
        q2=q2,
        q1_target=q1.copy(),
        q2_target=q2.copy(),
        qc=qc,
        qc_target=qc.copy(),
        actor_opt=nets.adam_init(actor.params.size, actor_lr),
        q1_opt=nets.adam_init(q1.params.size, critic_lr),
        q2_opt=nets.adam_init(q2.params.size, critic_lr),
        qc_opt=nets.adam_init(qc.params.size, cost_critic_lr),
    )


def greedy_action(actor: Mlp, obs: np.ndarray) -> np.ndarray:
    return nets.forward(actor, obs)


def explore_action(
    actor: Mlp, obs: np.ndarray, expl_sigma: float, rng: np.random.Generator
) -> np.ndarray:
    """Actor output plus clamped Gaussian exploration noise."""
    a = nets.forward(actor, obs)
    if expl_sigma > 0.0:
        a = a + rng.normal(0.0, expl_sigma, size=a.shape)
    return np.clip(a, -1.0, 1.0)


def _join(obs: np.ndarray, action: np.ndarray) -> np.ndarray:
    return np.concatenate([obs, action], axis=1)


def reward_critic_target(
    batch: Batch,
    bundle: AgentBundle,
    hyper: Hyper,
    rng: np.random.Generator,
    rewards: np.ndarray | None = None,
) -> np.ndarray:
    """Clipped double-Q target with target-policy smoothing.

    ``rewards`` overrides batch.reward (used by the reward-shaping baseline);
    cost bookkeeping is untouched either way.
    """
    r = batch.reward if rewards is None else rewards
    a_next = nets.forward_batch(bundle.actor_target, batch.next_obs)
    if hyper.smooth_sigma > 0.0:
        noise = rng.normal(0.0, hyper.smooth_sigma, size=a_next.shape)
        np.clip(noise, -hyper.smooth_clip, hyper.smooth_clip, out=noise)
        a_next = np.clip(a_next + noise, -1.0, 1.0)
    x_next = _join(batch.next_obs, a_next)
    q1n = nets.forward_batch(bundle.q1_target, x_next)[:, 0]
    q2n = nets.forward_batch(bundle.q2_target, x_next)[:, 0]
    return r + hyper.gamma_r * (1.0 - batch.done) * np.minimum(q1n, q2n)


def cost_critic_target(batch: Batch, bundle: AgentBundle, hyper: Hyper) -> np.ndarray:
    """Single-critic cost recursion; bootstrap clamped to [0, 1/(1-gamma_c)].

    The successor action comes from the online actor, no smoothing and no
    twin minimum -- conservatism is the safety mechanisms' job.
    """
    a_next = nets.forward_batch(bundle.actor, batch.next_obs)
    qcn = nets.forward_batch(bundle.qc_target, _join(batch.next_obs, a_next))[:, 0]
    np.clip(qcn, 0.0, 1.0 / (1.0 - hyper.gamma_c), out=qcn)
    return batch.cost + hyper.gamma_c * (1.0 - batch.done) * qcn


def regress_critic(net: Mlp, opt: AdamState, x: np.ndarray, y: np.ndarray):
    """One Adam step on mean squared error; returns (loss, new opt state)."""
    pred, cache = nets.forward_cache(net, x)
    resid = pred[:, 0] - y
    loss = float(resid @ resid) / resid.size
    upstream = (2.0 / resid.size) * resid[:, None]
    grad = nets.backward_params(net, cache, upstream)
    net.params, opt = nets.adam_step(net.params, grad, opt)
    return loss, opt


def update_critics(
    bundle: AgentBundle,
    batch: Batch,
    hyper: Hyper,
    rng: np.random.Generator,
    rewards: np.ndarray | None = None,
) -> dict:
    """Regress both reward critics and the cost critic to frozen-target values."""
    y = reward_critic_target(batch, bundle, hyper, rng, rewards)
    yc = cost_critic_target(batch, bundle, hyper)
    x = _join(batch.obs, batch.action)
    q1_loss, bundle.q1_opt = regress_critic(bundle.q1, bundle.q1_opt, x, y)
    q2_loss, bundle.q2_opt = regress_critic(bundle.q2, bundle.q2_opt, x, y)
    qc_loss, bundle.qc_opt = regress_critic(bundle.qc, bundle.qc_opt, x, yc)
    bundle.update_count += 1
    return {"q1": q1_loss, "q2": q2_loss, "qc": qc_loss}


def plain_actor_upstream(bundle: AgentBundle, obs: np.ndarray, actions: np.ndarray):
    """d/da of the TD3 actor loss -mean(Q1(s, a)); returns (upstream, loss).

    Shared by every algorithm: penalty / Lagrangian / multiplier terms add to
    this upstream, so a zero coefficient reproduces it bit for bit.
    """
    x = _join(obs, actions)
    q, cache = nets.forward_cache(bundle.q1, x)
    n = obs.shape[0]
    loss = -float(q.sum()) / n
    dx = nets.backward_input(bundle.q1, cache, np.full((n, 1), -1.0 / n))
    return dx[:, obs.shape[1] :], loss


def update_actor_and_targets(bundle: AgentBundle, batch: Batch, upstream_fn, hyper: Hyper):
    """Delayed actor step plus Polyak updates of every backbone target.

    ``upstream_fn(bundle, obs, actions) -> (dloss/dactions, loss)`` is the
    algorithm's actor objective.  No-op except when the critic update counter
    is a multiple of the policy delay.  Returns the actor loss or None.
    """
    if bundle.update_count % hyper.policy_delay != 0:
        return None
    actions, cache = nets.forward_cache(bundle.actor, batch.obs)
    upstream, loss = upstream_fn(bundle, batch.obs, actions)
    grad = nets.backward_params(bundle.actor, cache, upstream)
    bundle.actor.params, bundle.actor_opt = nets.adam_step(
        bundle.actor.params, grad, bundle.actor_opt
    )
    tau = hyper.tau
    for target, online in (
        (bundle.actor_target, bundle.actor),
        (bundle.q1_target, bundle.q1),
        (bundle.q2_target, bundle.q2),
        (bundle.qc_target, bundle.qc),
    ):
        # in-place Polyak: same buffer, so the target's weight views stay valid
        t = target.params
        t *= 1.0 - tau
        t += tau * online.params
    return loss
