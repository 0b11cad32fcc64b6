"""Configuration schema: YAML sections mirroring the library modules.

Sections: ``dsp``, ``filtering``, ``covariance``, ``gains``, ``sim``,
``synth``.  Values resolve with precedence CLI flag > config file > built-in
default.  Validation collects every violated invariant with its dotted field
path instead of stopping at the first one.
"""

from __future__ import annotations

import copy
import dataclasses
import json
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping, Optional

import yaml

from .control import ControlGains
from .pipe_sim import CorpusSpec, SimConfig, StackConfig, SyntheticProfileSpec
from .sonar_dsp import DspParams
from .uncertainty import CovarianceModel

FORMAT_VERSION = "1.0"
CONFIG_ENV_VAR = "PIPECENTER_CONFIG"

REFERENCE_PROTOCOL = {
    "sim.noise_half_width_m": 0.04,
    "sim.sweeps": 3,
    "sim.trials": 100,
    "sim.azimuth_step_deg": 9.0,
    "sim.convergence_threshold_m": 0.05,
}
ACCEPTANCE_MAX_MEAN_STEPS = 15.0
ACCEPTANCE_MAX_MEAN_SSE_M = 0.04


class ConfigError(ValueError):
    def __init__(self, errors: list[str]):
        self.errors = list(errors)
        super().__init__("invalid configuration:\n  " + "\n  ".join(self.errors))


@dataclass(frozen=True)
class Config:
    dsp: DspParams = field(default_factory=DspParams)
    filtering: dict = field(default_factory=lambda: _default_filtering())
    covariance: tuple = field(default_factory=lambda: (CovarianceModel(), CovarianceModel()))
    gains: ControlGains = field(default_factory=ControlGains)
    sim: SimConfig = field(default_factory=SimConfig)
    synth: CorpusSpec = field(default_factory=CorpusSpec)

    @property
    def stack(self) -> StackConfig:
        f = self.filtering
        return StackConfig(
            dsp=self.dsp,
            covariance=self.covariance,
            gains=self.gains,
            range_process_noise=f["range_process_noise"],
            range_meas_var=f["range_meas_var"],
            range_smoothing=f["range_smoothing"],
            center_process_noise=tuple(f["center_process_noise"]),
        )


def _plain(obj) -> Any:
    if dataclasses.is_dataclass(obj):
        return {f.name: _plain(getattr(obj, f.name)) for f in dataclasses.fields(obj)}
    if isinstance(obj, (tuple, list)):
        return [_plain(v) for v in obj]
    return obj


def _default_filtering() -> dict:
    stack = StackConfig()
    return {
        "range_process_noise": stack.range_process_noise,
        "range_meas_var": stack.range_meas_var,
        "range_smoothing": stack.range_smoothing,
        "center_process_noise": list(stack.center_process_noise),
    }


def default_dict() -> dict:
    sim = _plain(SimConfig())
    synth = _plain(CorpusSpec())
    return {
        "format_version": FORMAT_VERSION,
        "dsp": _plain(DspParams()),
        "filtering": _default_filtering(),
        "covariance": {"x": _plain(CovarianceModel()), "z": _plain(CovarianceModel())},
        "gains": _plain(ControlGains()),
        "sim": sim,
        "synth": synth,
    }


def deep_merge(base: dict, update: Mapping) -> dict:
    out = copy.deepcopy(base)
    for k, v in update.items():
        if isinstance(v, Mapping) and isinstance(out.get(k), dict):
            out[k] = deep_merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def set_dotted(d: dict, path: str, value) -> None:
    keys = path.split(".")
    node = d
    for k in keys[:-1]:
        node = node.setdefault(k, {})
    node[keys[-1]] = value


def _coerce(value, default, path: str, errors: list[str]):
    if default is None or value is None:
        return value
    if isinstance(default, bool):
        if isinstance(value, bool):
            return value
        errors.append(f"{path}: expected a boolean, got {value!r}")
        return default
    if isinstance(default, int):
        if isinstance(value, int) and not isinstance(value, bool):
            return value
        if isinstance(value, float) and value.is_integer():
            return int(value)
        errors.append(f"{path}: expected an integer, got {value!r}")
        return default
    if isinstance(default, float):
        if isinstance(value, (int, float)) and not isinstance(value, bool):
            return float(value)
        if isinstance(value, str):
            # YAML 1.1 reads "1e-4" as a string
            try:
                return float(value)
            except ValueError:
                pass
        errors.append(f"{path}: expected a number, got {value!r}")
        return default
    if isinstance(default, str):
        if isinstance(value, str):
            return value
        errors.append(f"{path}: expected a string, got {value!r}")
        return default
    return value


def _build(cls, data: Any, path: str, errors: list[str], nested: Optional[dict] = None):
    """Instantiate ``cls`` from a mapping, recording errors with field paths.

    When the combined construction fails, each field is re-checked in
    isolation (defaults elsewhere) so that every bad field gets reported.
    """
    nested = nested or {}
    defaults = cls()
    if not isinstance(data, Mapping):
        errors.append(f"{path}: expected a mapping")
        return defaults
    names = [f.name for f in dataclasses.fields(cls)]
    for key in data:
        if key not in names:
            errors.append(f"{path}.{key}: unknown field")
    kwargs, bad = {}, False
    for name in names:
        if name not in data:
            continue
        fpath = f"{path}.{name}"
        n_before = len(errors)
        if name in nested:
            value = _build(nested[name], data[name], fpath, errors)
        else:
            value = _coerce(data[name], getattr(defaults, name), fpath, errors)
            if isinstance(value, list):
                value = tuple(tuple(v) if isinstance(v, list) else v for v in value)
        if len(errors) > n_before:
            bad = True
            continue
        kwargs[name] = value
    try:
        built = cls(**kwargs)
    except (ValueError, TypeError) as exc:
        combined = f"{path}: {exc}"
    else:
        return defaults if bad else built
    found = False
    for name, value in kwargs.items():
        if name in nested:
            continue
        try:
            cls(**{name: value})
        except (ValueError, TypeError) as exc:
            errors.append(f"{path}.{name}: {exc}")
            found = True
    if not found:
        errors.append(combined)
    return defaults


def _build_filtering(data, errors: list[str]) -> dict:
    defaults = default_dict()["filtering"]
    out = dict(defaults)
    if not isinstance(data, Mapping):
        errors.append("filtering: expected a mapping")
        return out
    for key, value in data.items():
        path = f"filtering.{key}"
        if key not in defaults:
            errors.append(f"{path}: unknown field")
            continue
        if key == "center_process_noise":
            if (not isinstance(value, (list, tuple)) or len(value) != 2
                    or not all(isinstance(v, (int, float)) and not isinstance(v, bool) and v >= 0 for v in value)):
                errors.append(f"{path}: expected two non-negative numbers")
                continue
            out[key] = [float(v) for v in value]
            continue
        value = _coerce(value, defaults[key], path, errors)
        if key == "range_process_noise" and isinstance(value, float) and value < 0:
            errors.append(f"{path}: must be >= 0")
        elif key == "range_meas_var" and isinstance(value, float) and not value > 0:
            errors.append(f"{path}: must be > 0")
        else:
            out[key] = value
    return out


def config_from_dict(data: Mapping) -> Config:
    errors: list[str] = []
    if not isinstance(data, Mapping):
        raise ConfigError(["<root>: expected a mapping"])
    version = str(data.get("format_version", FORMAT_VERSION))
    if version.split(".")[0] != FORMAT_VERSION.split(".")[0]:
        errors.append(f"format_version: unsupported major version {version!r} (expected {FORMAT_VERSION})")
    known = {"format_version", "dsp", "filtering", "covariance", "gains", "sim", "synth"}
    for key in data:
        if key not in known:
            errors.append(f"{key}: unknown section")
    merged = deep_merge(default_dict(), data)

    dsp = _build(DspParams, merged["dsp"], "dsp", errors)
    filtering = _build_filtering(merged["filtering"], errors)
    cov = merged["covariance"]
    if isinstance(cov, Mapping) and set(cov) <= {"x", "z"}:
        covariance = (
            _build(CovarianceModel, cov.get("x", {}), "covariance.x", errors),
            _build(CovarianceModel, cov.get("z", {}), "covariance.z", errors),
        )
    else:
        errors.append("covariance: expected a mapping with sections 'x' and 'z'")
        covariance = (CovarianceModel(), CovarianceModel())
    gains = _build(ControlGains, merged["gains"], "gains", errors)
    sim = _build(SimConfig, merged["sim"], "sim", errors, nested={"profile": SyntheticProfileSpec})
    synth = _build(CorpusSpec, merged["synth"], "synth", errors, nested={"template": SyntheticProfileSpec})
    if errors:
        raise ConfigError(errors)
    return Config(dsp, filtering, covariance, gains, sim, synth)


def config_to_dict(cfg: Config) -> dict:
    return {
        "format_version": FORMAT_VERSION,
        "dsp": _plain(cfg.dsp),
        "filtering": copy.deepcopy(cfg.filtering),
        "covariance": {"x": _plain(cfg.covariance[0]), "z": _plain(cfg.covariance[1])},
        "gains": _plain(cfg.gains),
        "sim": _plain(cfg.sim),
        "synth": _plain(cfg.synth),
    }


def read_config_file(path) -> dict:
    """Parse a YAML config, or pull the embedded config out of a RunRecord."""
    text = Path(path).read_text(encoding="utf-8")
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError([f"{path}: not valid YAML ({exc})"]) from None
    if data is None:
        return {}
    if isinstance(data, Mapping) and data.get("kind") == "run_record":
        return data["config"]
    if not isinstance(data, Mapping):
        raise ConfigError([f"{path}: top level must be a mapping"])
    return dict(data)


def resolve_config(path=None, overrides: Optional[Mapping[str, Any]] = None, base: Optional[Mapping] = None) -> Config:
    """Build the effective config: defaults, then ``base`` (e.g. a protocol
    preset), then the file, then dotted-path overrides."""
    data = default_dict()
    if base:
        for k, v in base.items():
            set_dotted(data, k, v)
    if path is None:
        path = os.environ.get(CONFIG_ENV_VAR) or None
    if path is not None:
        data = deep_merge(data, read_config_file(path))
    for k, v in (overrides or {}).items():
        set_dotted(data, k, v)
    return config_from_dict(data)


def dump_yaml(cfg: Config) -> str:
    return yaml.safe_dump(json.loads(json.dumps(config_to_dict(cfg))), sort_keys=False)
