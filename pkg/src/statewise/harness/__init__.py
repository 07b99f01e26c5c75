"""Experiment orchestration: configs, training loop, metrics, sweeps, CLI."""

from .config import ALGOS, ENV_DEFAULT_STEPS, RunConfig, load_config_file
from .loop import evaluate, train

__all__ = [
    "ALGOS",
    "ENV_DEFAULT_STEPS",
    "RunConfig",
    "load_config_file",
    "evaluate",
    "train",
]
