"""
Synthetic weather + module temperature generator used as a test oracle.

Irradiance is a seasonal clear-sky bell shape modulated by a two-state
cloud process; wind speed is a clipped log-normal AR(1) process. The module
over-temperature is a chosen static model evaluated on the EWM of irradiance
and wind speed (a first-order lag with time constant ``tau``), plus Gaussian
noise and an optional constant bias.
"""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd
from scipy.signal import lfilter

from . import models as m
from .ewm import alpha_from, ewm_series

DEFAULT_TRUTH = {
    "ross": {"k": 0.0348},
    "sandia": {"a": math.log(0.0348), "b": -0.1},
    "faiman": {"u0": 28.7, "u1": 5.0},
    "wm1": {"k": 0.0348, "d": 10.0},
    "wm2": {"k": 0.0348, "k_w": 0.0025, "ws_cap": 8.0},
}

CSV_COLUMNS = ["timestamp", "g_poa", "t_ambient", "t_module", "ws"]


@dataclass(frozen=True)
class SynthSpec:
    model: str = "wm1"
    coefficients: dict = field(default_factory=dict)
    tau: float = 360.0            # s; 0 disables the lag
    dt: float = 60.0              # s
    days: int = 365
    start: str = "2021-01-04T00:00:00"
    noise_sigma: float = 0.5      # K
    bias: float = 0.0             # K, added to the measured module temperature
    seed: int = 0
    site_id: str = "synthetic"
    # weather process
    g_peak: float = 1000.0        # W/m^2
    p_clear: float = 0.35         # share of clear days
    p_overcast: float = 0.25      # share of overcast days; the rest are broken-cloud
    cloud_dwell: float = 900.0    # s, mean spell length on broken-cloud days
    cloud_fraction: float = 0.4   # share of cloudy spells on broken-cloud days
    ws_median: float = 3.0        # m/s
    ws_log_sigma: float = 0.55
    ws_memory: float = 7200.0     # s, AR(1) correlation time of log wind
    ws_offset: float = 1.0        # m/s subtracted before clipping at zero (calm spells)

    def __post_init__(self):
        m.model_class(self.model)
        if self.dt <= 0 or self.days <= 0:
            raise ValueError("dt and days must be positive")
        if self.tau < 0 or self.noise_sigma < 0:
            raise ValueError("tau and noise_sigma must be >= 0")
        if not 0 <= self.p_clear + self.p_overcast <= 1:
            raise ValueError("p_clear + p_overcast must lie in [0, 1]")

    def truth(self) -> m.ModelCoefficients:
        values = dict(DEFAULT_TRUTH[self.model])
        values.update(self.coefficients)
        return m.model_class(self.model)(**values)


def _clear_sky(t: np.ndarray, start: pd.Timestamp, g_peak: float) -> np.ndarray:
    doy = (start.dayofyear - 1) + t / 86400.0
    hour = (start.hour + start.minute / 60.0) + t / 3600.0
    tod = np.mod(hour, 24.0)
    season = np.sin(2 * np.pi * (doy - 80.0) / 365.0)
    day_length = 12.0 + 4.0 * season
    sunrise = 12.0 - day_length / 2.0
    phase = (tod - sunrise) / day_length
    up = (phase > 0) & (phase < 1)
    peak = g_peak * (0.8 + 0.2 * season)
    return np.where(up, peak * np.sin(np.pi * np.clip(phase, 0, 1)) ** 1.3, 0.0)


def _cloud_transmittance(n: int, dt: float, spec: SynthSpec, rng) -> np.ndarray:
    # Each day is clear, overcast or broken-cloud. Broken days alternate
    # spells of exponential duration between clear (1.0) and cloudy (0.15-0.7).
    steps_per_day = int(round(86400 / dt))
    n_days = -(-n // steps_per_day)
    kinds = rng.choice(3, size=n_days, p=[spec.p_clear, spec.p_overcast,
                                          1.0 - spec.p_clear - spec.p_overcast])
    out = np.empty(n_days * steps_per_day)
    for day, kind in enumerate(kinds):
        seg = out[day * steps_per_day:(day + 1) * steps_per_day]
        if kind == 0:
            seg[:] = 1.0
        elif kind == 1:
            seg[:] = rng.uniform(0.15, 0.4)
        else:
            i = 0
            while i < steps_per_day:
                steps = max(1, int(round(rng.exponential(spec.cloud_dwell) / dt)))
                cloudy = rng.random() < spec.cloud_fraction
                seg[i:i + steps] = rng.uniform(0.15, 0.7) if cloudy else 1.0
                i += steps
    return out[:n]


def _wind(n: int, dt: float, spec: SynthSpec, rng) -> np.ndarray:
    phi = math.exp(-dt / spec.ws_memory)
    innov = rng.standard_normal(n) * spec.ws_log_sigma * math.sqrt(1 - phi ** 2)
    z = lfilter([1.0], [1.0, -phi], innov)
    ws = spec.ws_median * np.exp(z) - spec.ws_offset
    return np.clip(ws, 0.0, 20.0)


def generate(spec: SynthSpec) -> pd.DataFrame:
    """Deterministic synthetic dataset for ``spec`` (same seed, same frame)."""
    rng = np.random.default_rng(spec.seed)
    n = int(round(spec.days * 86400 / spec.dt))
    start = pd.Timestamp(spec.start)
    t = np.arange(n) * spec.dt
    g = _clear_sky(t, start, spec.g_peak) * _cloud_transmittance(n, spec.dt, spec, rng)
    ws = _wind(n, spec.dt, spec, rng)

    doy = (start.dayofyear - 1) + t / 86400.0
    tod = np.mod(start.hour + t / 3600.0, 24.0)
    t_amb = (11.0 - 8.0 * np.cos(2 * np.pi * (doy - 15.0) / 365.0)
             - 4.0 * np.cos(2 * np.pi * (tod - 3.0) / 24.0))

    coeffs = spec.truth()
    if spec.tau > 0:
        a = alpha_from(spec.tau, spec.dt)
        g_in, ws_in = ewm_series(g, a), ewm_series(ws, a)
    else:
        g_in, ws_in = g, ws
    t_over = np.asarray(coeffs.predict(g_in, ws_in), dtype=float)
    noise = rng.normal(0.0, spec.noise_sigma, n) if spec.noise_sigma > 0 else 0.0
    t_mod = t_amb + t_over + noise + spec.bias

    stamps = start + pd.to_timedelta(t, unit="s")
    return pd.DataFrame({
        "timestamp": stamps.strftime("%Y-%m-%dT%H:%M:%S"),
        "g_poa": g,
        "t_ambient": t_amb,
        "t_module": t_mod,
        "ws": ws,
    })


def manifest(spec: SynthSpec) -> dict:
    return {
        "generator": "pvfem.synth",
        "spec": dataclasses.asdict(spec),
        "truth": spec.truth().to_dict(),
        "tau": spec.tau,
        "dt": spec.dt,
        "schema": {c: c for c in CSV_COLUMNS},
    }


def write(spec: SynthSpec, out_dir) -> tuple[Path, Path]:
    """Write ``<site_id>.csv`` and ``<site_id>_manifest.json`` into ``out_dir``."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    csv_path = out_dir / f"{spec.site_id}.csv"
    man_path = out_dir / f"{spec.site_id}_manifest.json"
    generate(spec).to_csv(csv_path, index=False, float_format="%.10g", lineterminator="\n")
    with open(man_path, "w") as fh:
        json.dump(manifest(spec), fh, indent=2, sort_keys=True)
        fh.write("\n")
    return csv_path, man_path
