"""Command-line entry point.

Exit codes: 0 success, 1 validation error, 2 I/O error, 3 acceptance failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
import time
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
import yaml

from .config import (
    ACCEPTANCE_MAX_MEAN_SSE_M,
    ACCEPTANCE_MAX_MEAN_STEPS,
    CONFIG_ENV_VAR,
    REFERENCE_PROTOCOL,
    ConfigError,
    config_to_dict,
    resolve_config,
)
from .filtering import ScalarKalman
from .pipe_sim import RNG_ALGORITHM, run_benchmark, synth_corpus
from .records import (
    FormatError,
    RunRecord,
    atomic_write_text,
    profile_log_text,
    range_table_text,
    read_profile_log,
    write_run_record,
)
from .sonar_dsp import ProfileError, extract_range

EXIT_OK, EXIT_VALIDATION, EXIT_IO, EXIT_ACCEPTANCE = 0, 1, 2, 3

log = logging.getLogger("pipecenter")

# flag dest -> dotted config path
SIM_FLAGS = {
    "seed": "sim.seed",
    "trials": "sim.trials",
    "noise": "sim.noise_half_width_m",
    "radius": "sim.pipe_radius_m",
    "sweeps": "sim.sweeps",
    "azimuth_step": "sim.azimuth_step_deg",
    "mode": "sim.mode",
    "workers": "sim.workers",
}


def _parse_set(items: Sequence[str]) -> dict:
    out = {}
    for item in items or ():
        if "=" not in item:
            raise ConfigError([f"--set {item!r}: expected key=value"])
        key, raw = item.split("=", 1)
        out[key.strip()] = yaml.safe_load(raw)
    return out


def _overrides(args, flags: dict) -> dict:
    over = _parse_set(args.set)
    for dest, path in flags.items():
        value = getattr(args, dest, None)
        if value is not None:
            over[path] = value
    return over


def _fmt(v, spec=".4f") -> str:
    if v is None or (isinstance(v, float) and math.isnan(v)):
        return "n/a"
    return format(v, spec)


def _print_table(rows: list[tuple[str, str]]) -> None:
    width = max(len(k) for k, _ in rows)
    for k, v in rows:
        print(f"  {k:<{width}}  {v}")


# -- simulate / benchmark ------------------------------------------------------


def cmd_simulate(args, protocol: bool = False) -> int:
    base = REFERENCE_PROTOCOL if protocol else None
    cfg = resolve_config(args.config, _overrides(args, SIM_FLAGS), base=base)
    t0 = time.perf_counter()
    stats, results = run_benchmark(cfg.sim, cfg.stack)
    runtime = time.perf_counter() - t0
    agg = stats.as_dict()
    record = RunRecord(
        command="benchmark" if protocol else "simulate",
        seed=cfg.sim.seed,
        config=config_to_dict(cfg),
        aggregate=agg,
        rng=RNG_ALGORITHM,
        trials=[r.summary() for r in results] if args.per_trial else None,
        runtime_s=runtime if args.timing else None,
    )
    if args.out:
        write_run_record(args.out, record)

    print(f"{record.command}: {stats.trials} trials, seed {cfg.sim.seed}, mode {cfg.sim.mode}")
    _print_table([
        ("converged", f"{stats.converged}/{stats.trials}"),
        ("failures", str(stats.failures)),
        ("mean steps", _fmt(stats.steps_mean, ".2f")),
        ("median steps", _fmt(stats.steps_median, ".1f")),
        ("mean steady-state error (m)", _fmt(stats.sse_mean)),
        ("median steady-state error (m)", _fmt(stats.sse_median)),
        ("runtime (s)", f"{runtime:.2f}"),
    ])
    if args.out:
        print(f"wrote {args.out}")

    if protocol:
        ok = (
            stats.failures == 0
            and stats.converged == stats.trials
            and stats.steps_mean <= ACCEPTANCE_MAX_MEAN_STEPS
            and stats.sse_mean <= ACCEPTANCE_MAX_MEAN_SSE_M
        )
        print(
            f"acceptance (mean steps <= {ACCEPTANCE_MAX_MEAN_STEPS:g}, "
            f"mean error <= {ACCEPTANCE_MAX_MEAN_SSE_M:g} m, no failures): {'PASS' if ok else 'FAIL'}"
        )
        if not ok:
            return EXIT_ACCEPTANCE
    return EXIT_OK


# -- process-profiles ----------------------------------------------------------


def process_log(log_path, cfg, smoothing: bool) -> tuple[list[dict], dict]:
    """Extract ranges from a profile log; returns table rows and a summary."""
    plog = read_profile_log(log_path)
    f = cfg.filtering
    filt = ScalarKalman(f["range_process_noise"], f["range_meas_var"]) if smoothing else None
    rows, errors = [], list(plog.errors)
    for rec in plog.records:
        try:
            det = extract_range(rec.profile, cfg.dsp, filt)
        except ProfileError as exc:
            errors.append((rec.line_no, str(exc)))
            continue
        p = rec.profile
        rows.append({
            "timestamp_s": p.timestamp_s,
            "azimuth_deg": p.azimuth_deg,
            "detected": det is not None,
            "range_m": None if det is None else det.range_m,
            "raw_range_m": None if det is None else det.raw_range_m,
            "source_bin": None if det is None else det.source_bin,
            "label_range_m": rec.label_range_m,
        })
    errors.sort()
    labeled = [r for r in rows if r["label_range_m"] is not None]
    hits = [r for r in labeled if r["detected"]]
    if hits:
        err = np.array([r["range_m"] - r["label_range_m"] for r in hits])
        rmse = float(np.sqrt(np.mean(err**2)))
        n_bins = plog.records[0].profile.n_bins
        bin_m = plog.records[0].profile.max_range_m / (n_bins - 1)
        rmse_bins = rmse / bin_m
    else:
        rmse = rmse_bins = None
    summary = {
        "format_version": "1.0",
        "kind": "range_summary",
        "rows_read": plog.rows_seen,
        "processed": len(rows),
        "malformed": len(errors),
        "malformed_lines": [{"line": ln, "error": msg} for ln, msg in errors],
        "detected": sum(r["detected"] for r in rows),
        "labeled": len(labeled),
        "detection_rate": (len(hits) / len(labeled)) if labeled else None,
        "rmse_m": rmse,
        "rmse_bins": rmse_bins,
        "smoothing": smoothing,
    }
    return rows, summary


def summary_path(out: Path) -> Path:
    return out.with_name(out.name + ".summary.json")


def cmd_process_profiles(args) -> int:
    cfg = resolve_config(args.config, _parse_set(args.set))
    smoothing = cfg.filtering["range_smoothing"] and not args.no_smoothing
    rows, summary = process_log(args.log, cfg, smoothing)
    for item in summary["malformed_lines"]:
        log.warning("line %d skipped: %s", item["line"], item["error"])
    if summary["rows_read"] == 0:
        log.warning("%s contains no profiles", args.log)
    text = range_table_text(rows)
    if args.out:
        out = Path(args.out)
        atomic_write_text(out, text)
        atomic_write_text(summary_path(out), json.dumps(summary, indent=2, sort_keys=True) + "\n")
    else:
        sys.stdout.write(text)
    _print_table([
        ("rows read", str(summary["rows_read"])),
        ("processed", str(summary["processed"])),
        ("malformed", str(summary["malformed"])),
        ("detected", str(summary["detected"])),
        ("detection rate", _fmt(summary["detection_rate"])),
        ("RMSE (m)", _fmt(summary["rmse_m"], ".5f")),
        ("RMSE (bins)", _fmt(summary["rmse_bins"], ".3f")),
    ])
    return EXIT_OK


# -- synth-corpus --------------------------------------------------------------


def cmd_synth_corpus(args) -> int:
    cfg = resolve_config(args.spec, _parse_set(args.set))
    if args.count < 0:
        raise ConfigError(["--count: must be >= 0"])
    seed = cfg.sim.seed if args.seed is None else args.seed
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    profiles, labels = [], []
    for p, truth in synth_corpus(cfg.synth, args.count, rng):
        profiles.append(p)
        labels.append(truth.range_m)
    text = profile_log_text(profiles, labels, n_bins=cfg.synth.template.n_bins)
    atomic_write_text(args.out, text)
    print(f"wrote {args.count} profiles to {args.out}")
    return EXIT_OK


# -- parser --------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="pipecenter",
        description=f"In-pipe centering toolkit. Default config path is read from ${CONFIG_ENV_VAR}.",
    )
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", help="YAML config (or a run record to replay)")
        sp.add_argument("--set", action="append", metavar="KEY=VALUE", help="dotted override, e.g. gains.kp_x=1.0")

    for name, help_ in (
        ("simulate", "run Monte-Carlo centering trials"),
        ("benchmark", "simulate with the reference protocol and check acceptance"),
    ):
        sp = sub.add_parser(name, help=help_)
        common(sp)
        sp.add_argument("--seed", type=int)
        sp.add_argument("--trials", type=int)
        sp.add_argument("--noise", type=float, help="uniform noise half-width (m)")
        sp.add_argument("--radius", type=float, help="pipe radius (m)")
        sp.add_argument("--sweeps", type=int)
        sp.add_argument("--azimuth-step", dest="azimuth_step", type=float)
        sp.add_argument("--mode", choices=("geometric", "profile"))
        sp.add_argument("--workers", type=int)
        sp.add_argument("--per-trial", action="store_true", help="include per-trial results")
        sp.add_argument("--timing", action="store_true", help="record wall-clock runtime")
        sp.add_argument("--out", help="run record path (JSON)")

    sp = sub.add_parser("process-profiles", help="extract ranges from a profile log")
    common(sp)
    sp.add_argument("log")
    sp.add_argument("--out", help="ranges CSV; a .summary.json sidecar is written next to it")
    sp.add_argument("--no-smoothing", action="store_true", help="treat pings independently")

    sp = sub.add_parser("synth-corpus", help="generate a labeled synthetic profile log")
    sp.add_argument("--spec", help="YAML config whose synth section defines the corpus")
    sp.add_argument("--set", action="append", metavar="KEY=VALUE")
    sp.add_argument("--count", type=int, default=1000)
    sp.add_argument("--seed", type=int)
    sp.add_argument("--out", required=True)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s: %(message)s",
    )
    handlers = {
        "simulate": lambda a: cmd_simulate(a),
        "benchmark": lambda a: cmd_simulate(a, protocol=True),
        "process-profiles": cmd_process_profiles,
        "synth-corpus": cmd_synth_corpus,
    }
    try:
        return handlers[args.command](args)
    except (ConfigError, FormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (ValueError, ProfileError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
