"""JSON run-configuration loading with strict key checking.

Every error is a :class:`ConfigError` whose message names the offending key
path (e.g. ``mission.regime.ami_threshold``).
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

from .exploration import MissionConfig, MissionConfigError
from .field import build_surrogate_from_observations, load_rate_field, make_step_field, replicate_transect
from .grid import GridSpec, InvalidGridError
from .observations import load_observations_csv
from .sensor import EnvConditions, SamplingRegime, SensorError
from .variography import VariogramError, VariogramModel, empirical_variogram, fit_gaussian_model

FIELD_KEYS = {
    "step": {"kind", "grid", "border_x", "rate_wet", "rate_dry"},
    "observations": {"kind", "grid", "path", "variogram", "replicate", "bin_width"},
    "file": {"kind", "path"},
}
MISSION_KEYS = {
    "strategy",
    "regime",
    "horizon",
    "seed",
    "robot_speed",
    "waypoint_spacing",
    "bootstrap",
    "bin_width",
    "max_lag",
    "loss_scale",
    "min_fit_measurements",
    "start",
    "mc_candidates",
    "mc_random_count",
    "variance_form",
}
RUN_KEYS = {"field", "mission", "env", "output_dir"}
COMPARE_KEYS = {"fields", "mission", "cells", "seeds", "horizon", "env", "output_dir", "jobs"}
CELL_KEYS = {"name", "field", "strategy", "regime"}


class ConfigError(ValueError):
    def __init__(self, key, message):
        super().__init__(f"{key}: {message}")
        self.key = key


def _check_keys(d, allowed, where):
    if not isinstance(d, dict):
        raise ConfigError(where or "<root>", "expected a JSON object")
    for k in d:
        if k not in allowed:
            raise ConfigError(f"{where}.{k}" if where else k, "unknown key")


def _require(d, key, where):
    if key not in d:
        raise ConfigError(f"{where}.{key}" if where else key, "missing required key")
    return d[key]


def _wrap(where, fn, *args):
    try:
        return fn(*args)
    except ConfigError:
        raise
    except (KeyError, TypeError, ValueError, InvalidGridError, SensorError, VariogramError, MissionConfigError) as exc:
        raise ConfigError(where, str(exc)) from None


def canonical_json(obj):
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def config_hash(obj):
    return hashlib.sha256(canonical_json(obj).encode()).hexdigest()


def load_json(path):
    try:
        return json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError("<file>", f"invalid JSON: {exc}") from None


def build_field(d, where="field", base_dir=None):
    kind = _require(d, "kind", where)
    if kind not in FIELD_KEYS:
        raise ConfigError(f"{where}.kind", f"unknown field kind {kind!r}")
    _check_keys(d, FIELD_KEYS[kind], where)
    base_dir = Path(base_dir or ".")
    if kind == "file":
        return _wrap(f"{where}.path", load_rate_field, base_dir / _require(d, "path", where))
    grid = _wrap(f"{where}.grid", GridSpec.from_dict, _require(d, "grid", where))
    if kind == "step":
        return _wrap(
            where,
            make_step_field,
            grid,
            float(_require(d, "border_x", where)),
            float(_require(d, "rate_wet", where)),
            float(_require(d, "rate_dry", where)),
        )
    obs = _wrap(f"{where}.path", load_observations_csv, base_dir / _require(d, "path", where))
    if "replicate" in d:
        rep = d["replicate"]
        _check_keys(rep, {"n_lines", "line_spacing", "y0"}, f"{where}.replicate")
        obs = replicate_transect(obs, int(rep.get("n_lines", 6)), float(rep.get("line_spacing", 10.0)), rep.get("y0"))
    if "variogram" in d:
        vg = _wrap(f"{where}.variogram", VariogramModel.from_dict, d["variogram"])
    else:
        emp = _wrap(where, empirical_variogram, obs, float(d.get("bin_width", 10.0)), 0.5 * grid.diagonal)
        vg = _wrap(f"{where}.variogram", fit_gaussian_model, emp)
    field = _wrap(where, build_surrogate_from_observations, obs, grid, vg)
    return field


def build_regime(d, where):
    _check_keys(d, {"kind", "fmi_duration", "ami_threshold", "max_duration"}, where)
    return _wrap(where, SamplingRegime.from_dict, d)


def build_env(d, where="env"):
    if d is None:
        return EnvConditions()
    _check_keys(d, set(EnvConditions.__dataclass_fields__), where)
    return _wrap(where, EnvConditions.from_dict, d)


def build_mission(d, env, where="mission", **overrides):
    d = dict(d)
    d.update({k: v for k, v in overrides.items() if v is not None})
    _check_keys(d, MISSION_KEYS, where)
    kwargs = {}
    for key in ("horizon", "robot_speed", "waypoint_spacing", "bin_width", "max_lag", "loss_scale"):
        if key in d and d[key] is not None:
            kwargs[key] = _wrap(f"{where}.{key}", float, d[key])
    for key in ("seed", "min_fit_measurements", "mc_random_count"):
        if key in d:
            kwargs[key] = _wrap(f"{where}.{key}", int, d[key])
    for key in ("mc_candidates", "variance_form"):
        if key in d:
            kwargs[key] = d[key]
    if "start" in d and d["start"] is not None:
        kwargs["start"] = tuple(float(v) for v in d["start"])
    if d.get("bootstrap") is not None:
        kwargs["bootstrap"] = _wrap(f"{where}.bootstrap", VariogramModel.from_dict, {"source": "prior", **d["bootstrap"]})
    regime = build_regime(_require(d, "regime", where), f"{where}.regime")
    strategy = _require(d, "strategy", where)
    if "horizon" not in kwargs:
        raise ConfigError(f"{where}.horizon", "missing required key")
    return _wrap(where, lambda: MissionConfig(strategy=strategy, regime=regime, env=env, **kwargs))


@dataclass(frozen=True)
class RunConfig:
    raw: dict
    field_source: dict
    mission: MissionConfig
    env: EnvConditions
    output_dir: Path


def load_run_config(path_or_dict, base_dir=None, **overrides):
    raw = load_json(path_or_dict) if not isinstance(path_or_dict, dict) else path_or_dict
    _check_keys(raw, RUN_KEYS, "")
    output_dir = overrides.pop("output_dir", None) or raw.get("output_dir", "out")
    env = build_env(raw.get("env"))
    mission = build_mission(_require(raw, "mission", ""), env, **overrides)
    field_source = _require(raw, "field", "")
    _check_keys(field_source, set().union(*FIELD_KEYS.values()), "field")
    effective = dict(raw)
    effective["mission"] = mission.to_dict()
    effective["output_dir"] = str(output_dir)
    return RunConfig(effective, field_source, mission, env, Path(output_dir))
