"""CSV logging with a fixed column contract.

Floats are written with shortest round-trip precision (Python repr), so a
deterministic run produces byte-identical logs.  Two files per run: a
per-episode training log and a per-evaluation-point log.
"""

from __future__ import annotations

from dataclasses import dataclass

TRAIN_COLUMNS = (
    "step",
    "episode",
    "ep_return",
    "ep_len",
    "ep_cost_count",
    "ep_cost_rate",
    "total_cost_rate",
    "lambda_mean",
    "recovery_frac",
    "usl_iters_mean",
    "act_time_us",
    "seed",
    "algo",
    "env",
)

EVAL_COLUMNS = (
    "step",
    "ep_return_mean",
    "ep_return_std",
    "ep_cost_rate_mean",
    "ep_cost_rate_std",
    "total_cost_rate",
    "lambda_mean",
    "recovery_frac",
    "usl_iters_mean",
    "act_time_us",
    "seed",
    "algo",
    "env",
)


@dataclass
class EvalSummary:
    """Aggregates over one batch of deterministic evaluation episodes."""

    return_mean: float
    return_std: float
    cost_rate_mean: float
    cost_rate_std: float
    recovery_frac: float
    usl_iters_mean: float
    act_time_us: float


def _fmt(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


class CsvWriter:
    def __init__(self, path, columns):
        self.path = path
        self.columns = tuple(columns)
        self._fh = open(path, "w", encoding="utf-8", newline="\n")
        self._fh.write(",".join(self.columns) + "\n")
        self._fh.flush()

    def write_row(self, row: dict) -> None:
        missing = set(self.columns) - row.keys()
        if missing:
            raise ValueError(f"row missing columns {sorted(missing)}")
        self._fh.write(",".join(_fmt(row[c]) for c in self.columns) + "\n")
        self._fh.flush()

    def close(self) -> None:
        self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def read_csv(path) -> list[dict]:
    """Read one of our CSVs back as a list of string-valued dicts."""
    with open(path, encoding="utf-8") as fh:
        lines = [line.rstrip("\n") for line in fh if line.strip()]
    header = lines[0].split(",")
    return [dict(zip(header, line.split(","))) for line in lines[1:]]
