"""
Run configuration: one YAML file, environment overrides and a stable hash.

Layout::

    dataset:
      path: site.csv            # relative to the config file
      dt: 60                    # s
      site_id: site
      schema: {timestamp: time, g_poa: poa, t_ambient: tamb, t_module: tmod, ws: wind}
    models: [ross, sandia, faiman, wm1, wm2]
    tau: null                   # s; null estimates it from the training set
    gamma: -0.35                # %/K
    h_y: null                   # kWh/m^2 of the evaluated period, optional
    delays: [60, 300, 600]      # s, delayed-sensor baselines
    mbe_mode: daytime
    daytime_g: 20
    output: out                 # relative to the working directory
    emit_plot_data: false
    defaults:                   # every fitting constant, see FitSettings
      g_min: 200
      ...

Environment variables ``PVFEM_<KEY>`` override top-level keys and
``PVFEM_<SECTION>__<KEY>`` nested ones (e.g. ``PVFEM_DEFAULTS__G_MIN=150``).
Values are parsed as YAML scalars.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import os
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .fitting import FitSettings
from .fempipe import MBE_MODES
from .metrics import DAYTIME_G
from .models import MODEL_NAMES
from .timeseries import REQUIRED_COLUMNS

ENV_PREFIX = "PVFEM_"


class ConfigError(ValueError):
    """Malformed or inconsistent run configuration."""


@dataclass(frozen=True)
class DatasetConfig:
    path: Path
    dt: float
    site_id: str
    schema: dict[str, str]


@dataclass(frozen=True)
class RunConfig:
    dataset: DatasetConfig | None
    models: tuple[str, ...] = MODEL_NAMES
    tau: float | None = None
    gamma: float = -0.35
    h_y: float | None = None
    delays: tuple[float, ...] = (60.0, 300.0, 600.0)
    mbe_mode: str = "daytime"
    daytime_g: float = DAYTIME_G
    output: Path = Path("out")
    emit_plot_data: bool = False
    settings: FitSettings = field(default_factory=FitSettings)
    raw: dict = field(default_factory=dict, compare=False)

    def canonical(self) -> dict:
        """Resolved configuration as plain data, independent of file layout."""
        ds = None
        if self.dataset is not None:
            ds = {"path": self.dataset.path.name, "dt": self.dataset.dt,
                  "site_id": self.dataset.site_id, "schema": dict(sorted(self.dataset.schema.items()))}
        return {
            "dataset": ds,
            "models": list(self.models),
            "tau": self.tau,
            "gamma": self.gamma,
            "h_y": self.h_y,
            "delays": list(self.delays),
            "mbe_mode": self.mbe_mode,
            "daytime_g": self.daytime_g,
            "emit_plot_data": self.emit_plot_data,
            "defaults": _jsonable(dataclasses.asdict(self.settings)),
        }

    def config_hash(self) -> str:
        return canonical_hash(self.canonical())


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    return obj


def canonical_hash(obj) -> str:
    text = json.dumps(_jsonable(obj), sort_keys=True, separators=(",", ":"), allow_nan=True)
    return hashlib.sha256(text.encode()).hexdigest()[:16]


def file_digest(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def apply_env(cfg: dict, environ=None, prefix: str = ENV_PREFIX) -> dict:
    """Return a copy of ``cfg`` with ``PVFEM_*`` overrides applied."""
    environ = os.environ if environ is None else environ
    out = json.loads(json.dumps(cfg, default=str)) if cfg else {}
    for name in sorted(environ):
        if not name.startswith(prefix):
            continue
        keys = [k.lower() for k in name[len(prefix):].split("__") if k]
        if not keys:
            continue
        try:
            value = yaml.safe_load(environ[name])
        except yaml.YAMLError as exc:
            raise ConfigError(f"{name}: cannot parse value: {exc}") from None
        node = out
        for key in keys[:-1]:
            child = node.get(key)
            if not isinstance(child, dict):
                child = {}
                node[key] = child
            node = child
        node[keys[-1]] = value
    return out


def read_yaml(path) -> dict:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        with open(path) as fh:
            data = yaml.safe_load(fh)
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: invalid YAML: {exc}") from None
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    return data


def _settings(raw: dict) -> FitSettings:
    if raw is None:
        return FitSettings()
    if not isinstance(raw, dict):
        raise ConfigError("'defaults' must be a mapping")
    names = {f.name: f for f in dataclasses.fields(FitSettings)}
    unknown = sorted(set(raw) - set(names))
    if unknown:
        raise ConfigError(f"unknown defaults key(s): {', '.join(unknown)}")
    values = {}
    for key, val in raw.items():
        default = getattr(FitSettings(), key)
        try:
            if isinstance(default, tuple):
                values[key] = tuple(float(v) for v in val)
            elif isinstance(default, int) and not isinstance(default, bool):
                values[key] = int(val)
            else:
                values[key] = float(val)
        except (TypeError, ValueError):
            raise ConfigError(f"defaults.{key}: bad value {val!r}") from None
    return FitSettings(**values)


def _dataset(raw, base: Path) -> DatasetConfig | None:
    if raw is None:
        return None
    if not isinstance(raw, dict):
        raise ConfigError("'dataset' must be a mapping")
    if "path" not in raw or "dt" not in raw:
        raise ConfigError("dataset needs 'path' and 'dt'")
    path = Path(str(raw["path"]))
    if not path.is_absolute():
        path = base / path
    schema = {c: c for c in REQUIRED_COLUMNS}
    schema.update({str(k): str(v) for k, v in (raw.get("schema") or {}).items()})
    try:
        dt = float(raw["dt"])
    except (TypeError, ValueError):
        raise ConfigError(f"dataset.dt: bad value {raw['dt']!r}") from None
    if not dt > 0:
        raise ConfigError("dataset.dt must be positive")
    return DatasetConfig(path, dt, str(raw.get("site_id") or path.stem), schema)


def _opt_float(raw: dict, key: str):
    val = raw.get(key)
    if val is None:
        return None
    try:
        return float(val)
    except (TypeError, ValueError):
        raise ConfigError(f"{key}: bad value {val!r}") from None


def parse_models(value) -> tuple[str, ...]:
    if isinstance(value, str):
        value = [v for v in value.replace(" ", "").split(",") if v]
    models = tuple(str(v).lower() for v in value or ())
    if not models:
        raise ConfigError("model list is empty")
    bad = [v for v in models if v not in MODEL_NAMES]
    if bad:
        raise ConfigError(f"unknown model(s) {', '.join(bad)}; choose from {', '.join(MODEL_NAMES)}")
    return models


def build_config(raw: dict, base: Path = Path(".")) -> RunConfig:
    """Validate a raw mapping (after overrides) into a RunConfig."""
    known = {"dataset", "models", "tau", "gamma", "h_y", "delays", "mbe_mode", "daytime_g",
             "output", "emit_plot_data", "defaults", "synth"}
    unknown = sorted(set(raw) - known)
    if unknown:
        raise ConfigError(f"unknown config key(s): {', '.join(unknown)}")
    tau = _opt_float(raw, "tau")
    if tau is not None and not tau > 0:
        raise ConfigError("tau must be positive")
    gamma = _opt_float(raw, "gamma")
    gamma = -0.35 if gamma is None else gamma
    if gamma > 0:
        raise ConfigError("gamma must be <= 0 %/K")
    mbe_mode = str(raw.get("mbe_mode", "daytime"))
    if mbe_mode not in MBE_MODES:
        raise ConfigError(f"mbe_mode must be one of {MBE_MODES}")
    daytime_g = _opt_float(raw, "daytime_g")
    try:
        delays = tuple(float(d) for d in raw.get("delays", (60, 300, 600)) or ())
    except (TypeError, ValueError):
        raise ConfigError("delays must be a list of seconds") from None
    output = Path(str(raw.get("output", "out")))
    return RunConfig(
        dataset=_dataset(raw.get("dataset"), base),
        models=parse_models(raw.get("models", MODEL_NAMES)),
        tau=tau,
        gamma=gamma,
        h_y=_opt_float(raw, "h_y"),
        delays=delays,
        mbe_mode=mbe_mode,
        daytime_g=DAYTIME_G if daytime_g is None else daytime_g,
        output=output,
        emit_plot_data=bool(raw.get("emit_plot_data", False)),
        settings=_settings(raw.get("defaults")),
        raw=raw,
    )


def load_config(path, environ=None) -> RunConfig:
    path = Path(path)
    raw = apply_env(read_yaml(path), environ)
    return build_config(raw, path.parent)
