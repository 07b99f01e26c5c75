"""Safety layer: learned linear cost model plus closed-form action correction.

The single-step cost is approximated as g(s)^T a + prev_cost with g an MLP
trained online alongside the policy.  When the model predicts a violation,
the action is projected onto the halfspace g^T a + prev_cost <= eps, which
for one constraint has the closed form mu - [(g^T mu + c - eps)/(g^T g)]+ g.
A warm-up window leaves actions untouched while the model is still raw.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import nets
from .backbone import HIDDEN, explore_action
from .nets import AdamState, Mlp, MlpSpec
from .replay import Batch

GRAD_NORM_TOL = 1e-8


@dataclass
class ProjectionStats:
    degenerate: int = 0  # correction needed but ||g|| ~ 0
    clamp_violations: int = 0  # box clamp re-broke the projected constraint
    corrections: int = 0


@dataclass
class LinearCostModel:
    g_net: Mlp
    opt: AdamState
    stats: ProjectionStats = field(default_factory=ProjectionStats)


def make_cost_model(obs_dim: int, act_dim: int, seed: int, lr: float = 3e-4) -> LinearCostModel:
    g_net = nets.init(MlpSpec((obs_dim, *HIDDEN, act_dim), "relu", "identity"), seed)
    return LinearCostModel(g_net=g_net, opt=nets.adam_init(g_net.params.size, lr))


def cost_model_update(model: LinearCostModel, batch: Batch) -> float:
    """One Adam step on MSE of g(s)^T a + prev_cost against the observed cost."""
    g, cache = nets.forward_cache(model.g_net, batch.obs)
    pred = np.einsum("ij,ij->i", g, batch.action) + batch.prev_cost
    resid = pred - batch.cost
    n = resid.size
    loss = float(resid @ resid) / n
    upstream = (2.0 / n) * resid[:, None] * batch.action
    grad = nets.backward_params(model.g_net, cache, upstream)
    model.g_net.params, model.opt = nets.adam_step(model.g_net.params, grad, model.opt)
    return loss


def halfspace_project(mu: np.ndarray, g: np.ndarray, prev_cost: float, eps: float) -> np.ndarray:
    """Exact minimizer of 0.5*||a - mu||^2 s.t. g.a + prev_cost <= eps (no box)."""
    mu = np.asarray(mu, dtype=np.float64)
    g = np.asarray(g, dtype=np.float64)
    violation = float(g @ mu) + prev_cost - eps
    if violation <= 0.0:
        return mu.copy()
    return mu - (violation / float(g @ g)) * g


def safe_project(
    mu: np.ndarray,
    g: np.ndarray,
    prev_cost: float,
    eps: float,
    stats: ProjectionStats | None = None,
) -> np.ndarray:
    """Halfspace projection followed by the [-1, 1] box clamp.

    Feasible inputs come back unchanged.  A (near-)zero g with a predicted
    violation leaves the action alone and bumps the degeneracy counter: the
    projection is undefined there.
    """
    mu = np.asarray(mu, dtype=np.float64)
    g = np.asarray(g, dtype=np.float64)
    violation = float(g @ mu) + prev_cost - eps
    if violation <= 0.0:
        return mu.copy()
    gg = float(g @ g)
    if gg < GRAD_NORM_TOL * GRAD_NORM_TOL:
        if stats is not None:
            stats.degenerate += 1
        return mu.copy()
    a = mu - (violation / gg) * g
    clamped = np.clip(a, -1.0, 1.0)
    if stats is not None:
        stats.corrections += 1
        if np.any(clamped != a) and float(g @ clamped) + prev_cost > eps + 1e-9:
            stats.clamp_violations += 1
    return clamped


def warmed_up(step: int, total_steps: int, warmup_ratio: float) -> bool:
    return step >= warmup_ratio * total_steps


def act(
    actor: Mlp,
    model: LinearCostModel,
    obs: np.ndarray,
    prev_cost: float,
    step: int,
    total_steps: int,
    warmup_ratio: float,
    eps: float,
    expl_sigma: float = 0.0,
    rng: np.random.Generator | None = None,
) -> np.ndarray:
    """Exploration action, projected once the warm-up window has passed."""
    a = explore_action(actor, obs, expl_sigma, rng) if expl_sigma > 0.0 else nets.forward(actor, obs)
    if not warmed_up(step, total_steps, warmup_ratio):
        return a
    g = nets.forward(model.g_net, obs)
    return safe_project(a, g, prev_cost, eps, model.stats)
