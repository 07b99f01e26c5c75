"""Run configuration: one flat record of every knob an experiment needs.

Config files are flat UTF-8 ``key = value`` lines with ``#`` comments; keys
are exactly the field names below.  Precedence is CLI flags over file values
over defaults.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, fields

from ..envs import ENV_NAMES

ALGOS = ("td3", "reward_shaping", "safety_layer", "recovery", "lagrangian", "fac", "usl")

ENV_DEFAULT_STEPS = {"stabilization": 100_000, "speedlimit": 200_000, "hazardworld": 200_000}


@dataclass
class RunConfig:
    algo: str
    env: str
    seed: int = 0
    total_steps: int = 0  # 0 -> per-environment default
    horizon: int = 500
    eval_every: int = 2000
    eval_episodes: int = 10
    out: str = "runs"
    # constraint threshold and discounts
    cost_limit: float = 0.1
    reward_discount: float = 0.99
    cost_discount: float = 0.99
    # safeguard schedules
    warmup_ratio: float = 0.2
    policy_delay: int = 2
    multiplier_delay: int = 12
    # optimizer rates
    batch_size: int = 256
    critic_lr: float = 3e-4
    actor_lr: float = 3e-4
    safe_critic_lr: float = 3e-4
    safe_actor_lr: float = 3e-4
    multiplier_lr: float = 1e-5
    multiplier_init: float = 0.0
    # two-stage correction
    penalty_factor: float = 5.0
    iterative_step: int = 20
    eta: float = 0.05
    # backbone details
    expl_sigma: float = 0.1
    smooth_sigma: float = 0.2
    smooth_clip: float = 0.5
    tau: float = 0.005
    start_steps: int = 1000
    capacity: int = 200_000
    # reward-shaping baseline weight (r' = r - sigma * c)
    sigma_shaping: float = 1.0

    def __post_init__(self):
        self.validate()

    def validate(self):
        if self.algo not in ALGOS:
            raise ValueError(f"unknown algo {self.algo!r}; choose from {ALGOS}")
        if self.env not in ENV_NAMES:
            raise ValueError(f"unknown env {self.env!r}; choose from {ENV_NAMES}")
        if self.total_steps < 0:
            raise ValueError("total_steps must be >= 0 (0 = per-env default)")
        for name in (
            "horizon",
            "eval_every",
            "eval_episodes",
            "policy_delay",
            "multiplier_delay",
            "batch_size",
            "capacity",
        ):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        for name in ("critic_lr", "actor_lr", "safe_critic_lr", "safe_actor_lr", "eta"):
            if getattr(self, name) <= 0.0:
                raise ValueError(f"{name} must be positive")
        for name in (
            "cost_limit",
            "warmup_ratio",
            "multiplier_lr",
            "multiplier_init",
            "penalty_factor",
            "expl_sigma",
            "smooth_sigma",
            "sigma_shaping",
        ):
            if getattr(self, name) < 0.0:
                raise ValueError(f"{name} must be >= 0")
        if self.iterative_step < 0 or self.start_steps < 0:
            raise ValueError("iterative_step and start_steps must be >= 0")
        for name in ("reward_discount", "cost_discount"):
            if not 0.0 < getattr(self, name) < 1.0:
                raise ValueError(f"{name} must lie in (0, 1)")
        if not 0.0 <= self.tau <= 1.0:
            raise ValueError("tau must lie in [0, 1]")

    def resolved_total_steps(self) -> int:
        return self.total_steps if self.total_steps > 0 else ENV_DEFAULT_STEPS[self.env]

    def to_dict(self) -> dict:
        return asdict(self)


_FIELD_TYPES = {f.name: f.type for f in fields(RunConfig)}


def _coerce(key: str, raw: str):
    if key not in _FIELD_TYPES:
        raise ValueError(f"unknown config key {key!r}")
    kind = _FIELD_TYPES[key]
    if kind in ("int", int):
        return int(raw)
    if kind in ("float", float):
        return float(raw)
    return raw


def load_config_file(path) -> dict:
    """Parse ``key = value`` lines; '#' starts a comment, blank lines ignored."""
    values: dict = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            stripped = line.split("#", 1)[0].strip()
            if not stripped:
                continue
            if "=" not in stripped:
                raise ValueError(f"{path}:{lineno}: expected 'key = value', got {line.rstrip()!r}")
            key, raw = (part.strip() for part in stripped.split("=", 1))
            values[key] = _coerce(key, raw)
    return values


def build_config(file_values: dict | None = None, overrides: dict | None = None) -> RunConfig:
    """Merge file values then overrides (CLI) on top of the defaults."""
    merged: dict = {}
    for source in (file_values or {}, overrides or {}):
        for key, value in source.items():
            merged[key] = _coerce(key, value) if isinstance(value, str) else value
    if "algo" not in merged or "env" not in merged:
        raise ValueError("config needs at least 'algo' and 'env'")
    return RunConfig(**merged)
