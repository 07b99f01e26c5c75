"""Per-algorithm wiring around the shared backbone.

Each pipeline supplies exactly three things on top of the common update
schedule: how to pick actions (train and eval), the actor objective as an
upstream-gradient function, and any auxiliary updates (cost model, risk
networks, multipliers).  Everything else -- critics, delays, targets -- is
identical across algorithms by construction.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import nets, optimization, projection, recovery, usl
from ..backbone import AgentBundle, explore_action, greedy_action
from ..projection import warmed_up
from ..replay import Batch
from .config import RunConfig


@dataclass
class ActInfo:
    task_action: np.ndarray | None = None
    used_recovery: bool = False
    usl_iters: int = 0


class Pipeline:
    """Plain TD3: no safeguard; also the base class for everything else."""

    name = "td3"

    def __init__(self, cfg: RunConfig, bundle: AgentBundle, total_steps: int):
        self.cfg = cfg
        self.bundle = bundle
        self.total_steps = total_steps

    def act_train(self, obs, prev_cost, step, rng):
        return explore_action(self.bundle.actor, obs, self.cfg.expl_sigma, rng), ActInfo()

    def act_eval(self, obs, prev_cost, step):
        return greedy_action(self.bundle.actor, obs), ActInfo()

    def reward_override(self, batch: Batch):
        return None

    def extra_updates(self, batch: Batch, rng, step: int):
        pass

    def actor_upstream(self, bundle, obs, actions):
        from ..backbone import plain_actor_upstream

        return plain_actor_upstream(bundle, obs, actions)

    def lambda_value(self) -> float:
        return 0.0

    def extra_tensors(self) -> list[tuple[str, np.ndarray]]:
        return []

    def load_extra(self, tensors: dict) -> None:
        pass


class RewardShapingPipeline(Pipeline):
    """TD3 on r' = r - sigma * c; cost accounting stays untouched."""

    name = "reward_shaping"

    def reward_override(self, batch: Batch):
        return batch.reward - self.cfg.sigma_shaping * batch.cost


class SafetyLayerPipeline(Pipeline):
    """Closed-form halfspace projection on a linear cost model, after warm-up."""

    name = "safety_layer"

    def __init__(self, cfg, bundle, total_steps):
        super().__init__(cfg, bundle, total_steps)
        self.model = projection.make_cost_model(
            bundle.obs_dim, bundle.act_dim, seed=cfg.seed + 101, lr=cfg.safe_critic_lr
        )

    def _guard(self, a, obs, prev_cost, step):
        if not warmed_up(step, self.total_steps, self.cfg.warmup_ratio):
            return a
        g = nets.forward(self.model.g_net, obs)
        return projection.safe_project(a, g, prev_cost, self.cfg.cost_limit, self.model.stats)

    def act_train(self, obs, prev_cost, step, rng):
        a = explore_action(self.bundle.actor, obs, self.cfg.expl_sigma, rng)
        return self._guard(a, obs, prev_cost, step), ActInfo()

    def act_eval(self, obs, prev_cost, step):
        return self._guard(greedy_action(self.bundle.actor, obs), obs, prev_cost, step), ActInfo()

    def extra_updates(self, batch, rng, step):
        projection.cost_model_update(self.model, batch)

    def extra_tensors(self):
        return [("g_net", self.model.g_net.params)]

    def load_extra(self, tensors):
        self.model.g_net.params = tensors["g_net"]


class RecoveryPipeline(Pipeline):
    """Risk-gated composite of the task actor and a learned recovery actor."""

    name = "recovery"

    def __init__(self, cfg, bundle, total_steps):
        super().__init__(cfg, bundle, total_steps)
        self.pair = recovery.make_risk_pair(
            bundle.obs_dim,
            bundle.act_dim,
            seed=cfg.seed + 202,
            q_lr=cfg.safe_critic_lr,
            pi_lr=cfg.safe_actor_lr,
        )

    def _gate_active(self, step) -> bool:
        return warmed_up(step, self.total_steps, self.cfg.warmup_ratio)

    def _act(self, a_task, obs, step):
        if not self._gate_active(step):
            return a_task, ActInfo(task_action=a_task.copy())
        a, used = recovery.gate(obs, a_task, self.pair, self.cfg.cost_limit)
        return a, ActInfo(task_action=a_task.copy(), used_recovery=used)

    def act_train(self, obs, prev_cost, step, rng):
        a_task = explore_action(self.bundle.actor, obs, self.cfg.expl_sigma, rng)
        return self._act(a_task, obs, step)

    def act_eval(self, obs, prev_cost, step):
        return self._act(greedy_action(self.bundle.actor, obs), obs, step)

    def extra_updates(self, batch, rng, step):
        recovery.update_risk_pair(
            self.pair,
            batch,
            self.cfg.cost_discount,
            self.bundle.actor,
            self.cfg.cost_limit,
            gate_active=self._gate_active(step),
            update_actor=self.bundle.update_count % self.cfg.policy_delay == 0,
            tau=self.cfg.tau,
        )

    def extra_tensors(self):
        return [
            ("q_risk", self.pair.q_risk.params),
            ("q_risk_target", self.pair.q_risk_target.params),
            ("pi_risk", self.pair.pi_risk.params),
        ]

    def load_extra(self, tensors):
        self.pair.q_risk.params = tensors["q_risk"]
        self.pair.q_risk_target.params = tensors["q_risk_target"]
        self.pair.pi_risk.params = tensors["pi_risk"]


class LagrangianPipeline(Pipeline):
    """Scalar multiplier, projected dual ascent on the mean constraint gap."""

    name = "lagrangian"

    def __init__(self, cfg, bundle, total_steps):
        super().__init__(cfg, bundle, total_steps)
        self.mult = optimization.ScalarMultiplier(cfg.multiplier_init, cfg.multiplier_lr)

    def extra_updates(self, batch, rng, step):
        # dual step on the primal (actor) schedule; timescales separate via lr
        if self.bundle.update_count % self.cfg.policy_delay == 0:
            self.mult = optimization.lag_dual_update(
                self.mult, batch, self.bundle, self.cfg.cost_limit
            )

    def actor_upstream(self, bundle, obs, actions):
        return optimization.lag_actor_upstream(bundle, obs, actions, self.mult.value)

    def lambda_value(self):
        return self.mult.value

    def extra_tensors(self):
        return [("lambda", np.array([self.mult.value]))]

    def load_extra(self, tensors):
        self.mult = optimization.ScalarMultiplier(float(tensors["lambda"][0]), self.cfg.multiplier_lr)


class FacPipeline(Pipeline):
    """State-dependent multiplier network (softplus head), delayed ascent."""

    name = "fac"

    def __init__(self, cfg, bundle, total_steps):
        super().__init__(cfg, bundle, total_steps)
        self.mnet = optimization.make_multiplier_net(
            bundle.obs_dim, seed=cfg.seed + 303, lr=cfg.multiplier_lr, delay=cfg.multiplier_delay
        )
        self._lambda_mean = 0.0

    def extra_updates(self, batch, rng, step):
        if self.bundle.update_count % self.mnet.delay == 0:
            optimization.fac_multiplier_update(self.mnet, batch, self.bundle, self.cfg.cost_limit)

    def actor_upstream(self, bundle, obs, actions):
        upstream, loss = optimization.fac_actor_upstream(
            bundle, obs, actions, self.mnet, self.cfg.cost_limit
        )
        self._lambda_mean = float(nets.forward_batch(self.mnet.net, obs).mean())
        return upstream, loss

    def lambda_value(self):
        return self._lambda_mean

    def extra_tensors(self):
        return [("multiplier_net", self.mnet.net.params)]

    def load_extra(self, tensors):
        self.mnet.net.params = tensors["multiplier_net"]


class UslPipeline(Pipeline):
    """Exact-penalty actor objective plus unrolled correction at decision time."""

    name = "usl"

    def __init__(self, cfg, bundle, total_steps):
        super().__init__(cfg, bundle, total_steps)
        self.usl_cfg = usl.UslConfig(
            kappa=cfg.penalty_factor,
            delta=cfg.cost_limit,
            eta=cfg.eta,
            k_max=cfg.iterative_step,
        )
        self.stats = usl.UslStats()
        self.qc_fn = usl.critic_fn(bundle.qc, bundle.obs_dim)

    def act_train(self, obs, prev_cost, step, rng):
        a, iters = usl.usl_act(
            self.bundle,
            self.qc_fn,
            obs,
            self.usl_cfg,
            mode="train",
            rng=rng,
            expl_sigma=self.cfg.expl_sigma,
            stats=self.stats,
        )
        return a, ActInfo(usl_iters=iters)

    def act_eval(self, obs, prev_cost, step):
        a, iters = usl.usl_act(self.bundle, self.qc_fn, obs, self.usl_cfg, mode="eval")
        return a, ActInfo(usl_iters=iters)

    def actor_upstream(self, bundle, obs, actions):
        return usl.penalty_actor_upstream(bundle, obs, actions, self.usl_cfg)


_PIPELINES = {
    "td3": Pipeline,
    "reward_shaping": RewardShapingPipeline,
    "safety_layer": SafetyLayerPipeline,
    "recovery": RecoveryPipeline,
    "lagrangian": LagrangianPipeline,
    "fac": FacPipeline,
    "usl": UslPipeline,
}


def build_pipeline(cfg: RunConfig, bundle: AgentBundle, total_steps: int) -> Pipeline:
    return _PIPELINES[cfg.algo](cfg, bundle, total_steps)
