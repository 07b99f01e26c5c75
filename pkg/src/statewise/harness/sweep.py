"""Grid sweeps over one hyperparameter axis, one run per (value, seed).

Runs share the CSV schema so curves overlay directly.  Independent runs may
execute in parallel worker processes; each owns its environment, buffer,
networks and rng.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

from .config import RunConfig
from .loop import train

SWEEP_AXES = {
    "kappa": "penalty_factor",
    "k_max": "iterative_step",
    "lr_lambda": "multiplier_lr",
    "delta": "cost_limit",
}


def sweep_configs(base: RunConfig, axis: str, values, seeds=None) -> list[RunConfig]:
    if axis not in SWEEP_AXES:
        raise ValueError(f"unknown sweep axis {axis!r}; choose from {sorted(SWEEP_AXES)}")
    values = list(values)
    if not values:
        raise ValueError("sweep needs at least one value")
    field = SWEEP_AXES[axis]
    field_type = int if field == "iterative_step" else float
    seeds = [base.seed] if seeds is None else list(seeds)
    configs = []
    for value in values:
        for seed in seeds:
            out = str(Path(base.out) / f"{axis}_{value}")
            configs.append(replace(base, **{field: field_type(value), "seed": seed, "out": out}))
    return configs


def run_sweep(base: RunConfig, axis: str, values, seeds=None, max_workers: int = 1) -> list[Path]:
    configs = sweep_configs(base, axis, values, seeds)
    if max_workers <= 1:
        return [train(cfg) for cfg in configs]
    with ProcessPoolExecutor(max_workers=max_workers) as pool:
        return list(pool.map(train, configs))
