"""Constrained policy optimization by Lagrangian relaxation.

Two flavours: a scalar multiplier updated by projected dual ascent on the
mean constraint gap, and a state-dependent multiplier network with a softplus
head (strictly positive outputs) updated by delayed stochastic ascent.  Both
keep the multiplier learning rate far below the actor's, preserving the
primal-dual timescale separation.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from . import nets
from .backbone import HIDDEN, AgentBundle, plain_actor_upstream
from .nets import AdamState, Mlp, MlpSpec
from .replay import Batch


@dataclass(frozen=True)
class ScalarMultiplier:
    value: float
    lr: float

    def __post_init__(self):
        if self.value < 0.0:
            raise ValueError("multiplier must be nonnegative")
        if self.lr < 0.0:
            raise ValueError("multiplier learning rate must be nonnegative")


@dataclass
class MultiplierNet:
    net: Mlp
    opt: AdamState
    delay: int


def make_multiplier_net(obs_dim: int, seed: int, lr: float = 1e-5, delay: int = 12) -> MultiplierNet:
    net = nets.init(MlpSpec((obs_dim, *HIDDEN, 1), "relu", "softplus"), seed)
    return MultiplierNet(net=net, opt=nets.adam_init(net.params.size, lr), delay=delay)


def _constraint_gaps(bundle: AgentBundle, obs: np.ndarray) -> np.ndarray:
    """Q_c(s, pi(s)) for a batch of states, through the online networks."""
    a = nets.forward_batch(bundle.actor, obs)
    return nets.forward_batch(bundle.qc, np.concatenate([obs, a], axis=1))[:, 0]


def lag_actor_upstream(bundle: AgentBundle, obs: np.ndarray, actions: np.ndarray, lam: float):
    """d/da of mean[-Q1(s, a) + lam * Qc(s, a)]; lam is treated as a constant.

    lam == 0 skips the constraint term entirely and is therefore bit-identical
    to the plain TD3 actor objective.
    """
    upstream, loss = plain_actor_upstream(bundle, obs, actions)
    if lam != 0.0:
        n = obs.shape[0]
        x = np.concatenate([obs, actions], axis=1)
        qc, cache = nets.forward_cache(bundle.qc, x)
        loss += lam * float(qc.sum()) / n
        dx = nets.backward_input(bundle.qc, cache, np.full((n, 1), lam / n))
        upstream = upstream + dx[:, obs.shape[1] :]
    return upstream, loss


def lag_dual_update(
    mult: ScalarMultiplier, batch: Batch, bundle: AgentBundle, eps: float
) -> ScalarMultiplier:
    """lam' = max(0, lam + lr * mean(Qc(s, pi(s)) - eps)): projected dual ascent."""
    gap = float(_constraint_gaps(bundle, batch.obs).mean()) - eps
    return replace(mult, value=max(0.0, mult.value + mult.lr * gap))


def fac_actor_upstream(
    bundle: AgentBundle, obs: np.ndarray, actions: np.ndarray, mnet: MultiplierNet, eps: float
):
    """d/da of mean[-Q1(s, a) + lam(s) * (Qc(s, a) - eps)], lam(s) detached."""
    upstream, loss = plain_actor_upstream(bundle, obs, actions)
    n = obs.shape[0]
    lam = nets.forward_batch(mnet.net, obs)[:, 0]
    x = np.concatenate([obs, actions], axis=1)
    qc, cache = nets.forward_cache(bundle.qc, x)
    loss += float(lam @ (qc[:, 0] - eps)) / n
    dx = nets.backward_input(bundle.qc, cache, (lam / n)[:, None])
    return upstream + dx[:, obs.shape[1] :], loss


def fac_multiplier_update(mnet: MultiplierNet, batch: Batch, bundle: AgentBundle, eps: float):
    """One delayed Adam ascent step on E[lam(s) * (Qc(s, pi(s)) - eps)].

    The critic and actor are frozen: only the multiplier parameters move.
    Callers invoke this every ``mnet.delay`` critic updates.
    """
    gap = _constraint_gaps(bundle, batch.obs) - eps
    n = gap.size
    _, cache = nets.forward_cache(mnet.net, batch.obs)
    # ascend: Adam descends, so feed it the negated objective gradient
    grad = nets.backward_params(mnet.net, cache, (-gap / n)[:, None])
    mnet.net.params, mnet.opt = nets.adam_step(mnet.net.params, grad, mnet.opt)
    return float(gap.mean())
