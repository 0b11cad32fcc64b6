"""Steady-state error and convergence speed versus intersection noise.

    python scripts/noise_sweep.py --noise 0 0.01 0.02 0.04 0.08 --trials 100
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import sys
from dataclasses import dataclass, field

from pipecenter.config import resolve_config
from pipecenter.pipe_sim import run_benchmark


@dataclass
class Sweep:
    noise: list[float] = field(default_factory=lambda: [0.0, 0.01, 0.02, 0.04, 0.08])
    trials: int = 100
    seed: int = 42


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--noise", type=float, nargs="+", default=Sweep().noise)
    ap.add_argument("--trials", type=int, default=Sweep.trials)
    ap.add_argument("--seed", type=int, default=Sweep.seed)
    ap.add_argument("--config")
    args = ap.parse_args()
    sweep = Sweep(args.noise, args.trials, args.seed)

    cfg = resolve_config(args.config)
    w = csv.writer(sys.stdout)
    w.writerow(["noise_half_width_m", "steps_mean", "sse_mean_m", "sse_median_m", "failures"])
    for h in sweep.noise:
        sim = dataclasses.replace(cfg.sim, noise_half_width_m=h, trials=sweep.trials, seed=sweep.seed)
        s, _ = run_benchmark(sim, cfg.stack)
        w.writerow([h, f"{s.steps_mean:.3f}", f"{s.sse_mean:.5f}", f"{s.sse_median:.5f}", s.failures])


if __name__ == "__main__":
    main()
