"""Quick probe: USL on selected seeds, printing the convergence trajectory."""

import sys
import time
from pathlib import Path

from statewise.harness.config import RunConfig
from statewise.harness.loop import train
from statewise.harness.metrics import read_csv

out = Path(sys.argv[1])
seeds = [int(s) for s in sys.argv[2].split(",")]
for seed in seeds:
    t0 = time.perf_counter()
    d = train(RunConfig(algo="usl", env="stabilization", seed=seed, total_steps=100_000, out=str(out)))
    rows = read_csv(d / "eval_log.csv")
    print(f"usl seed {seed} done in {time.perf_counter() - t0:.0f}s", flush=True)
    for r in rows[-6:]:
        print(
            f"  step {r['step']:>6} ret {float(r['ep_return_mean']):7.1f} "
            f"cr {100 * float(r['ep_cost_rate_mean']):6.2f}% tcr {100 * float(r['total_cost_rate']):5.2f}% "
            f"iters {float(r['usl_iters_mean']):6.2f}",
            flush=True,
        )
