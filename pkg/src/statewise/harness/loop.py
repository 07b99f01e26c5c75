"""The training loop shared by every algorithm, plus evaluation and run I/O.

Per step: pick an action through the algorithm's pipeline (uniform random
during the initial exploration window), step the environment, store the
transition, then -- once learning has started -- sample a mini-batch, update
the critics, run the algorithm's auxiliary updates, and take the delayed
actor/target step.  A per-episode row goes to train_log.csv; every
``eval_every`` steps a deterministic evaluation goes to eval_log.csv.  Runs
are deterministic: same config and seed, byte-identical CSV output (except
the wall-clock act_time_us column).
"""

from __future__ import annotations

import time
from pathlib import Path

import numpy as np

from .. import envs
from ..backbone import Hyper, make_bundle, update_actor_and_targets, update_critics
from ..replay import Buffer, Transition
from .algos import ActInfo, Pipeline, build_pipeline
from .checkpoint import load_checkpoint, save_checkpoint
from .config import RunConfig
from .metrics import EVAL_COLUMNS, TRAIN_COLUMNS, CsvWriter, EvalSummary

_SEED_MOD = 2**31 - 1

BACKBONE_TENSORS = (
    "actor",
    "actor_target",
    "q1",
    "q2",
    "q1_target",
    "q2_target",
    "qc",
    "qc_target",
)


def _hyper(cfg: RunConfig) -> Hyper:
    return Hyper(
        gamma_r=cfg.reward_discount,
        gamma_c=cfg.cost_discount,
        policy_delay=cfg.policy_delay,
        expl_sigma=cfg.expl_sigma,
        smooth_sigma=cfg.smooth_sigma,
        smooth_clip=cfg.smooth_clip,
        batch_size=cfg.batch_size,
        tau=cfg.tau,
    )


def evaluate(pipeline: Pipeline, cfg: RunConfig, step: int, episodes: int, seed: int) -> EvalSummary:
    """Deterministic-policy rollouts with all safeguards active.

    No exploration noise; projection / gating / unrolling stay on (subject to
    their warm-up state at the given training step).  Never touches the
    training rng or environment.
    """
    env = envs.make(cfg.env, cfg.horizon)
    returns, cost_rates, recov, iters, times = [], [], [], [], []
    for ep in range(episodes):
        obs = env.reset((seed + ep) % _SEED_MOD)
        prev_cost = 0.0
        ep_return = ep_cost = 0.0
        ep_len = 0
        n_recov = n_iters = 0
        while True:
            t0 = time.perf_counter_ns()
            action, info = pipeline.act_eval(obs, prev_cost, step)
            times.append(time.perf_counter_ns() - t0)
            result = env.step(action)
            ep_return += result.reward
            ep_cost += result.cost
            ep_len += 1
            n_recov += info.used_recovery
            n_iters += info.usl_iters
            prev_cost = result.cost
            obs = result.next_obs
            if result.done:
                break
        returns.append(ep_return)
        cost_rates.append(ep_cost / ep_len)
        recov.append(n_recov / ep_len)
        iters.append(n_iters / ep_len)
    return EvalSummary(
        return_mean=float(np.mean(returns)),
        return_std=float(np.std(returns)),
        cost_rate_mean=float(np.mean(cost_rates)),
        cost_rate_std=float(np.std(cost_rates)),
        recovery_frac=float(np.mean(recov)),
        usl_iters_mean=float(np.mean(iters)),
        act_time_us=float(np.mean(times)) / 1000.0,
    )


def _save(run_dir: Path, cfg: RunConfig, pipeline: Pipeline, step: int) -> Path:
    bundle = pipeline.bundle
    tensors = [(name, getattr(bundle, name).params) for name in BACKBONE_TENSORS]
    tensors.extend(pipeline.extra_tensors())
    manifest = {
        "algo": cfg.algo,
        "env": cfg.env,
        "step": step,
        "config": cfg.to_dict(),
        "obs_dim": bundle.obs_dim,
        "act_dim": bundle.act_dim,
    }
    path = run_dir / "final.ckpt"
    save_checkpoint(path, manifest, tensors)
    return path


def restore_pipeline(checkpoint_path) -> tuple[Pipeline, RunConfig, int]:
    """Rebuild a pipeline (nets included) from a checkpoint file."""
    manifest, tensors = load_checkpoint(checkpoint_path)
    cfg = RunConfig(**manifest["config"])
    bundle = make_bundle(
        manifest["obs_dim"],
        manifest["act_dim"],
        seed=cfg.seed,
        actor_lr=cfg.actor_lr,
        critic_lr=cfg.critic_lr,
        cost_critic_lr=cfg.safe_critic_lr,
    )
    for name in BACKBONE_TENSORS:
        getattr(bundle, name).params = tensors[name]
    pipeline = build_pipeline(cfg, bundle, cfg.resolved_total_steps())
    pipeline.load_extra(tensors)
    return pipeline, cfg, int(manifest["step"])


def train(cfg: RunConfig) -> Path:
    """Run one experiment; returns the run directory (CSV logs + checkpoint)."""
    total_steps = cfg.resolved_total_steps()
    rng = np.random.default_rng(cfg.seed)
    env = envs.make(cfg.env, cfg.horizon)
    spec = env.spec()
    bundle = make_bundle(
        spec.obs_dim,
        spec.act_dim,
        seed=cfg.seed,
        actor_lr=cfg.actor_lr,
        critic_lr=cfg.critic_lr,
        cost_critic_lr=cfg.safe_critic_lr,
    )
    pipeline = build_pipeline(cfg, bundle, total_steps)
    hyper = _hyper(cfg)
    buffer = Buffer(cfg.capacity, spec.obs_dim, spec.act_dim)

    run_dir = Path(cfg.out) / f"{cfg.algo}_{cfg.env}_seed{cfg.seed}"
    run_dir.mkdir(parents=True, exist_ok=True)
    eval_seed_base = (cfg.seed * 1_000_003 + 17) % _SEED_MOD

    obs = env.reset(int(rng.integers(_SEED_MOD)))
    prev_cost = 0.0
    episode = 0
    ep_return = ep_cost = ep_lambda = ep_recov = ep_iters = ep_act_ns = 0.0
    ep_len = 0
    total_cost = 0.0

    with CsvWriter(run_dir / "train_log.csv", TRAIN_COLUMNS) as train_csv, CsvWriter(
        run_dir / "eval_log.csv", EVAL_COLUMNS
    ) as eval_csv:
        for step in range(1, total_steps + 1):
            t0 = time.perf_counter_ns()
            if step <= cfg.start_steps:
                action, info = rng.uniform(-1.0, 1.0, spec.act_dim), ActInfo()
            else:
                action, info = pipeline.act_train(obs, prev_cost, step, rng)
            ep_act_ns += time.perf_counter_ns() - t0

            result = env.step(action)
            buffer.push(
                Transition(
                    obs,
                    action,
                    result.next_obs,
                    result.reward,
                    result.cost,
                    result.done,
                    prev_cost,
                    info.task_action,
                )
            )
            ep_return += result.reward
            ep_cost += result.cost
            total_cost += result.cost
            ep_len += 1
            ep_recov += info.used_recovery
            ep_iters += info.usl_iters
            prev_cost = result.cost
            obs = result.next_obs

            if step > cfg.start_steps:
                batch = buffer.sample(cfg.batch_size, rng)
                update_critics(bundle, batch, hyper, rng, pipeline.reward_override(batch))
                pipeline.extra_updates(batch, rng, step)
                update_actor_and_targets(bundle, batch, pipeline.actor_upstream, hyper)
            ep_lambda += pipeline.lambda_value()

            if result.done:
                train_csv.write_row(
                    {
                        "step": step,
                        "episode": episode,
                        "ep_return": ep_return,
                        "ep_len": ep_len,
                        "ep_cost_count": ep_cost,
                        "ep_cost_rate": ep_cost / ep_len,
                        "total_cost_rate": total_cost / step,
                        "lambda_mean": ep_lambda / ep_len,
                        "recovery_frac": ep_recov / ep_len,
                        "usl_iters_mean": ep_iters / ep_len,
                        "act_time_us": ep_act_ns / ep_len / 1000.0,
                        "seed": cfg.seed,
                        "algo": cfg.algo,
                        "env": cfg.env,
                    }
                )
                episode += 1
                ep_return = ep_cost = ep_lambda = ep_recov = ep_iters = ep_act_ns = 0.0
                ep_len = 0
                obs = env.reset(int(rng.integers(_SEED_MOD)))
                prev_cost = 0.0

            if step % cfg.eval_every == 0 or step == total_steps:
                summary = evaluate(
                    pipeline, cfg, step, cfg.eval_episodes, eval_seed_base + step
                )
                eval_csv.write_row(
                    {
                        "step": step,
                        "ep_return_mean": summary.return_mean,
                        "ep_return_std": summary.return_std,
                        "ep_cost_rate_mean": summary.cost_rate_mean,
                        "ep_cost_rate_std": summary.cost_rate_std,
                        "total_cost_rate": total_cost / step,
                        "lambda_mean": pipeline.lambda_value(),
                        "recovery_frac": summary.recovery_frac,
                        "usl_iters_mean": summary.usl_iters_mean,
                        "act_time_us": summary.act_time_us,
                        "seed": cfg.seed,
                        "algo": cfg.algo,
                        "env": cfg.env,
                    }
                )

    _save(run_dir, cfg, pipeline, total_steps)
    with open(run_dir / "config.txt", "w", encoding="utf-8") as fh:
        for key, value in cfg.to_dict().items():
            fh.write(f"{key} = {value}\n")
    return run_dir
