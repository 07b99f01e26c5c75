"""Recovery policy: a risk critic with a truncated recursion plus a rescue actor.

The risk critic estimates the future probability of a cost signal through
Q_risk(s, a) = c + (1 - c) * gamma * Q_risk(s', a'), whose targets stay in
[0, 1] because the bootstrap is clamped there.  At decision time a gate hands
control to the recovery actor whenever the risk of the task proposal exceeds
the threshold.  Both the task proposal and the executed action are stored so
the replay buffer keeps the full story of every gated step.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import nets
from .backbone import actor_spec, critic_spec
from .nets import AdamState, Mlp
from .replay import Batch


@dataclass
class RiskPair:
    q_risk: Mlp
    q_risk_target: Mlp
    pi_risk: Mlp
    q_opt: AdamState
    pi_opt: AdamState


def make_risk_pair(
    obs_dim: int, act_dim: int, seed: int, q_lr: float = 3e-4, pi_lr: float = 3e-4
) -> RiskPair:
    seeds = np.random.SeedSequence(seed).generate_state(2)
    q_risk = nets.init(critic_spec(obs_dim, act_dim), int(seeds[0]))
    pi_risk = nets.init(actor_spec(obs_dim, act_dim), int(seeds[1]))
    return RiskPair(
        q_risk=q_risk,
        q_risk_target=q_risk.copy(),
        pi_risk=pi_risk,
        q_opt=nets.adam_init(q_risk.params.size, q_lr),
        pi_opt=nets.adam_init(pi_risk.params.size, pi_lr),
    )


def gate(obs: np.ndarray, a_task: np.ndarray, pair: RiskPair, delta: float):
    """(executed action, used_recovery): task action unless its risk exceeds delta.

    The comparison is inclusive (<= delta keeps the task action) and uses the
    raw critic output, unclamped.
    """
    risk = float(nets.forward(pair.q_risk, np.concatenate([obs, a_task]))[0])
    if risk <= delta:
        return a_task, False
    return nets.forward(pair.pi_risk, obs), True


def _gated_batch_actions(
    next_obs: np.ndarray, pair: RiskPair, actor: Mlp, delta: float, gate_active: bool
) -> np.ndarray:
    """Successor actions of the composite policy actually being executed."""
    a_task = nets.forward_batch(actor, next_obs)
    if not gate_active:
        return a_task
    risk = nets.forward_batch(pair.q_risk, np.concatenate([next_obs, a_task], axis=1))[:, 0]
    a_risk = nets.forward_batch(pair.pi_risk, next_obs)
    return np.where((risk <= delta)[:, None], a_task, a_risk)


def risk_target(batch: Batch, pair: RiskPair, gamma: float, next_actions: np.ndarray) -> np.ndarray:
    """y = c + (1 - c) * gamma * clamp(Q'_risk(s', a'), 0, 1); always in [0, 1]."""
    qn = nets.forward_batch(
        pair.q_risk_target, np.concatenate([batch.next_obs, next_actions], axis=1)
    )[:, 0]
    np.clip(qn, 0.0, 1.0, out=qn)
    return batch.cost + (1.0 - batch.cost) * gamma * qn


def update_risk_pair(
    pair: RiskPair,
    batch: Batch,
    gamma: float,
    actor: Mlp,
    delta: float,
    gate_active: bool,
    update_actor: bool = True,
    tau: float = 0.005,
) -> dict:
    """Regress the risk critic; optionally step the recovery actor and target.

    The critic trains on executed actions; the bootstrap action comes from
    the gated composite policy at s', i.e. from whatever would actually run.
    """
    next_actions = _gated_batch_actions(batch.next_obs, pair, actor, delta, gate_active)
    y = risk_target(batch, pair, gamma, next_actions)
    x = np.concatenate([batch.obs, batch.action], axis=1)
    pred, cache = nets.forward_cache(pair.q_risk, x)
    resid = pred[:, 0] - y
    n = resid.size
    q_loss = float(resid @ resid) / n
    grad = nets.backward_params(pair.q_risk, cache, (2.0 / n) * resid[:, None])
    pair.q_risk.params, pair.q_opt = nets.adam_step(pair.q_risk.params, grad, pair.q_opt)

    pi_loss = None
    if update_actor:
        a, a_cache = nets.forward_cache(pair.pi_risk, batch.obs)
        xq = np.concatenate([batch.obs, a], axis=1)
        q, q_cache = nets.forward_cache(pair.q_risk, xq)
        pi_loss = float(q.sum()) / n  # descend expected risk
        upstream = nets.backward_input(pair.q_risk, q_cache, np.full((n, 1), 1.0 / n))
        grad = nets.backward_params(pair.pi_risk, a_cache, upstream[:, batch.obs.shape[1] :])
        pair.pi_risk.params, pair.pi_opt = nets.adam_step(pair.pi_risk.params, grad, pair.pi_opt)
        t = pair.q_risk_target.params  # in-place Polyak keeps the weight views valid
        t *= 1.0 - tau
        t += tau * pair.q_risk.params
    return {"q_risk": q_loss, "pi_risk": pi_loss}
