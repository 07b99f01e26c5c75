"""Run the full behavioral comparison protocol and print a summary table.

One run per (algo, seed) on stabilization at 100k steps, plus the kappa
sweep points.  Used to calibrate the acceptance thresholds; the acceptance
suite re-runs the same protocol through its fixtures.
"""

import sys
import time
from pathlib import Path

from statewise.harness.config import RunConfig
from statewise.harness.loop import train
from statewise.harness.metrics import read_csv

OUT = Path(sys.argv[1]) if len(sys.argv) > 1 else Path("/tmp/protocol")


def summarize(run_dir, tail=5):
    rows = read_csv(Path(run_dir) / "eval_log.csv")
    last = rows[-tail:]
    ret = sum(float(r["ep_return_mean"]) for r in last) / len(last)
    cr = sum(float(r["ep_cost_rate_mean"]) for r in last) / len(last)
    tcr = float(rows[-1]["total_cost_rate"])
    iters = float(rows[-1]["usl_iters_mean"])
    return ret, cr, tcr, iters


def main():
    jobs = []
    for seed in (0, 1, 2):
        jobs.append(("usl", seed, {}))
        jobs.append(("td3", seed, {}))
    for algo in ("safety_layer", "recovery", "lagrangian", "fac"):
        jobs.append((algo, 0, {}))
    jobs.append(("usl", 0, {"penalty_factor": 0.5, "out": str(OUT / "kappa_0.5")}))
    jobs.append(("usl", 0, {"penalty_factor": 10.0, "out": str(OUT / "kappa_10")}))

    for algo, seed, extra in jobs:
        cfg = RunConfig(
            algo=algo,
            env="stabilization",
            seed=seed,
            total_steps=100_000,
            out=extra.pop("out", str(OUT)),
            **extra,
        )
        t0 = time.perf_counter()
        run_dir = train(cfg)
        ret, cr, tcr, iters = summarize(run_dir)
        print(
            f"{algo:13s} seed {seed}  return {ret:7.1f}  eval_cr {100 * cr:6.2f}%  "
            f"total_cr {100 * tcr:6.2f}%  iters {iters:5.2f}  ({time.perf_counter() - t0:.0f}s)  {run_dir}",
            flush=True,
        )


if __name__ == "__main__":
    main()
