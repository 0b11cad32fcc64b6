"""On-disk formats: run records (JSON) and sonar profile logs (CSV).

Every file carries a format version; readers reject unknown major versions.
Floats are written in shortest round-trip form (``repr``), so write -> read
reproduces the in-memory values exactly.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Sequence

from . import __version__
from .sonar_dsp import IntensityProfile, ProfileError

FORMAT_VERSION = "1.0"
PROFILE_LOG_MAGIC = "# pipecenter-profile-log"
RANGES_MAGIC = "# pipecenter-ranges"
PROFILE_FIXED_COLUMNS = ("timestamp_s", "azimuth_deg", "max_range_m", "n_bins")
LABEL_COLUMN = "label_range_m"
ARTIFACT_VERSION = f"pipecenter {__version__}"


class FormatError(ValueError):
    pass


def check_version(version: str, what: str) -> None:
    if str(version).split(".")[0] != FORMAT_VERSION.split(".")[0]:
        raise FormatError(f"{what}: unsupported format_version {version!r} (reader supports {FORMAT_VERSION})")


def atomic_write_text(path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as f:
            f.write(text)
        os.chmod(tmp, 0o666 & ~_umask())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _umask() -> int:
    mask = os.umask(0)
    os.umask(mask)
    return mask


def fmt(x: float) -> str:
    return repr(float(x))


# -- run records ---------------------------------------------------------------


@dataclass
class RunRecord:
    command: str
    seed: int
    config: dict
    aggregate: dict
    rng: str = ""
    trials: Optional[list] = None
    runtime_s: Optional[float] = None
    artifact_version: str = ARTIFACT_VERSION
    format_version: str = FORMAT_VERSION

    def to_dict(self) -> dict:
        d = {
            "kind": "run_record",
            "format_version": self.format_version,
            "artifact_version": self.artifact_version,
            "command": self.command,
            "seed": self.seed,
            "rng": self.rng,
            "config": self.config,
            "aggregate": self.aggregate,
        }
        if self.trials is not None:
            d["trials"] = self.trials
        if self.runtime_s is not None:
            d["runtime_s"] = self.runtime_s
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "RunRecord":
        if d.get("kind") != "run_record":
            raise FormatError("not a run record")
        check_version(d.get("format_version", "?"), "run record")
        return cls(
            command=d["command"],
            seed=d["seed"],
            config=d["config"],
            aggregate=d["aggregate"],
            rng=d.get("rng", ""),
            trials=d.get("trials"),
            runtime_s=d.get("runtime_s"),
            artifact_version=d.get("artifact_version", ""),
            format_version=d["format_version"],
        )

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True, allow_nan=False) + "\n"


def write_run_record(path, record: RunRecord) -> None:
    atomic_write_text(path, record.dumps())


def read_run_record(path) -> RunRecord:
    with open(path, encoding="utf-8") as f:
        try:
            data = json.load(f)
        except json.JSONDecodeError as exc:
            raise FormatError(f"{path}: not valid JSON ({exc})") from None
    return RunRecord.from_dict(data)


# -- profile logs --------------------------------------------------------------


@dataclass(frozen=True)
class ProfileRecord:
    profile: IntensityProfile
    label_range_m: Optional[float]
    line_no: int


@dataclass
class ProfileLog:
    records: list[ProfileRecord] = field(default_factory=list)
    errors: list[tuple[int, str]] = field(default_factory=list)
    has_labels: bool = False
    rows_seen: int = 0


def profile_log_text(
    profiles: Sequence[IntensityProfile],
    labels: Optional[Sequence[Optional[float]]] = None,
    n_bins: Optional[int] = None,
) -> str:
    """Serialize profiles; all must share one bin count."""
    if n_bins is None:
        n_bins = profiles[0].n_bins if profiles else 0
    header = list(PROFILE_FIXED_COLUMNS)
    if labels is not None:
        header.append(LABEL_COLUMN)
    header += [f"s_{i}" for i in range(n_bins)]
    buf = io.StringIO()
    buf.write(f"{PROFILE_LOG_MAGIC} format_version={FORMAT_VERSION}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for k, p in enumerate(profiles):
        if p.n_bins != n_bins:
            raise ValueError(f"profile {k} has {p.n_bins} bins, log expects {n_bins}")
        row = [fmt(p.timestamp_s), fmt(p.azimuth_deg), fmt(p.max_range_m), str(p.n_bins)]
        if labels is not None:
            lab = labels[k]
            row.append("" if lab is None else fmt(lab))
        row += [fmt(v) for v in p.samples]
        w.writerow(row)
    return buf.getvalue()


def write_profile_log(path, profiles, labels=None, n_bins=None) -> None:
    atomic_write_text(path, profile_log_text(profiles, labels, n_bins))


def _parse_version_line(line: str, magic: str, what: str) -> None:
    if not line.startswith(magic):
        raise FormatError(f"{what}: missing '{magic}' version line")
    for tok in line[len(magic):].split():
        if tok.startswith("format_version="):
            check_version(tok.split("=", 1)[1], what)
            return
    raise FormatError(f"{what}: version line lacks format_version")


def read_profile_log(path) -> ProfileLog:
    """Parse a profile log; malformed rows are collected, not raised.

    An empty file yields an empty log.  Structural problems (bad version line
    or header) raise ``FormatError``.
    """
    log = ProfileLog()
    with open(path, encoding="utf-8", newline="") as f:
        first = f.readline()
        if first == "":
            return log
        _parse_version_line(first.rstrip("\r\n"), PROFILE_LOG_MAGIC, str(path))
        reader = csv.reader(f)
        try:
            header = next(reader)
        except StopIteration:
            return log
        if tuple(header[:4]) != PROFILE_FIXED_COLUMNS:
            raise FormatError(f"{path}: header must start with {', '.join(PROFILE_FIXED_COLUMNS)}")
        log.has_labels = len(header) > 4 and header[4] == LABEL_COLUMN
        first_sample = 5 if log.has_labels else 4
        n_samples = len(header) - first_sample
        for row in reader:
            line_no = reader.line_num + 1
            if not row or all(not c.strip() for c in row):
                continue
            log.rows_seen += 1
            try:
                if len(row) != len(header):
                    raise ValueError(f"expected {len(header)} fields, got {len(row)}")
                n_bins = int(row[3])
                if n_bins != n_samples:
                    raise ValueError(f"n_bins={n_bins} but {n_samples} sample columns")
                label = None
                if log.has_labels and row[4].strip():
                    label = float(row[4])
                    if not math.isfinite(label):
                        raise ValueError("non-finite label")
                samples = [float(v) for v in row[first_sample:]]
                profile = IntensityProfile(samples, float(row[1]), float(row[2]), float(row[0]))
            except (ValueError, ProfileError) as exc:
                log.errors.append((line_no, str(exc)))
                continue
            log.records.append(ProfileRecord(profile, label, line_no))
    return log


# -- range tables --------------------------------------------------------------

RANGE_COLUMNS = ("timestamp_s", "azimuth_deg", "detected", "range_m", "raw_range_m", "source_bin", LABEL_COLUMN)


def range_table_text(rows: Iterable[dict]) -> str:
    buf = io.StringIO()
    buf.write(f"{RANGES_MAGIC} format_version={FORMAT_VERSION}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(RANGE_COLUMNS)
    for r in rows:
        w.writerow([
            fmt(r["timestamp_s"]),
            fmt(r["azimuth_deg"]),
            "1" if r["detected"] else "0",
            "" if r.get("range_m") is None else fmt(r["range_m"]),
            "" if r.get("raw_range_m") is None else fmt(r["raw_range_m"]),
            "" if r.get("source_bin") is None else str(r["source_bin"]),
            "" if r.get(LABEL_COLUMN) is None else fmt(r[LABEL_COLUMN]),
        ])
    return buf.getvalue()


def read_range_table(path) -> list[dict]:
    with open(path, encoding="utf-8", newline="") as f:
        _parse_version_line(f.readline().rstrip("\r\n"), RANGES_MAGIC, str(path))
        reader = csv.DictReader(f)
        out = []
        for row in reader:
            out.append({
                "timestamp_s": float(row["timestamp_s"]),
                "azimuth_deg": float(row["azimuth_deg"]),
                "detected": row["detected"] == "1",
                "range_m": float(row["range_m"]) if row["range_m"] else None,
                "raw_range_m": float(row["raw_range_m"]) if row["raw_range_m"] else None,
                "source_bin": int(row["source_bin"]) if row["source_bin"] else None,
                LABEL_COLUMN: float(row[LABEL_COLUMN]) if row[LABEL_COLUMN] else None,
            })
        return out
