"""Reference simulation protocol across several seeds.

    python scripts/run_reference_protocol.py --seeds 0 1 2 3 4 --out results/protocol.json
"""

from __future__ import annotations

import argparse
import dataclasses
import json
from dataclasses import dataclass, field

from pipecenter.config import REFERENCE_PROTOCOL, resolve_config
from pipecenter.pipe_sim import run_benchmark
from pipecenter.records import atomic_write_text


@dataclass
class ProtocolRun:
    seeds: list[int] = field(default_factory=lambda: [0, 1, 2, 3, 4])
    config: str | None = None
    mode: str = "geometric"


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--seeds", type=int, nargs="+", default=ProtocolRun().seeds)
    ap.add_argument("--config")
    ap.add_argument("--mode", choices=("geometric", "profile"), default="geometric")
    ap.add_argument("--out")
    args = ap.parse_args()
    run = ProtocolRun(args.seeds, args.config, args.mode)

    cfg = resolve_config(run.config, {"sim.mode": run.mode}, base=REFERENCE_PROTOCOL)
    rows = []
    print(f"{'seed':>5} {'steps':>7} {'sse (m)':>9} {'fail':>5}")
    for seed in run.seeds:
        stats, _ = run_benchmark(dataclasses.replace(cfg.sim, seed=seed), cfg.stack)
        rows.append({"seed": seed, **stats.as_dict()})
        print(f"{seed:>5} {stats.steps_mean:>7.2f} {stats.sse_mean:>9.4f} {stats.failures:>5}")
    if args.out:
        atomic_write_text(args.out, json.dumps({"run": dataclasses.asdict(run), "results": rows}, indent=2) + "\n")


if __name__ == "__main__":
    main()
