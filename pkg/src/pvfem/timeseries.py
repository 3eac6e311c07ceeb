"""
Ingestion, validation, resampling, filtering and splitting of measured
weather / module temperature time series.

All series live on a uniform time grid. Gaps and rejected rows are kept as
all-NaN rows so that the step between consecutive samples is always ``dt``.
Filtered series (see :func:`filter_rows`) are the one exception: they are
row subsets meant for regressions, not for time-domain operations.
"""

from __future__ import annotations

import dataclasses
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping

import numpy as np
import pandas as pd

logger = logging.getLogger(__name__)

REQUIRED_COLUMNS = ("timestamp", "g_poa", "t_ambient", "t_module", "ws")
OPTIONAL_COLUMNS = ("wind_direction", "rel_humidity")

# Plausibility bounds for dropping rows; temperatures in degC.
TEMPERATURE_RANGE = (-50.0, 120.0)
G_MAX = 2000.0
WS_MAX = 60.0


class DataError(ValueError):
    """Raised when input data cannot be turned into a valid series."""


@dataclass(frozen=True)
class WeatherSeries:
    """Measured weather and module temperature on a uniform grid.

    ``data`` is indexed by timestamp and holds the columns ``g_poa`` [W/m^2],
    ``t_ambient`` [C], ``t_module`` [C] and ``ws`` [m/s], plus optionally
    ``wind_direction`` and ``rel_humidity``.
    """

    data: pd.DataFrame
    dt: float
    site_id: str = ""
    dropped_count: int = 0

    def __len__(self) -> int:
        return len(self.data)

    @property
    def n_valid(self) -> int:
        return int(self.data[["g_poa", "t_ambient", "t_module", "ws"]].notna().all(axis=1).sum())

    @property
    def index(self) -> pd.DatetimeIndex:
        return self.data.index


@dataclass(frozen=True)
class OverTempSeries:
    """Over-temperature ``t_over = t_module - t_ambient`` with its drivers."""

    data: pd.DataFrame
    dt: float
    site_id: str = ""

    def __len__(self) -> int:
        return len(self.data)

    @property
    def n_valid(self) -> int:
        return int(self.data[["t_over", "g_poa", "ws"]].notna().all(axis=1).sum())

    @property
    def index(self) -> pd.DatetimeIndex:
        return self.data.index

    @property
    def t_over(self) -> pd.Series:
        return self.data["t_over"]

    @property
    def g_poa(self) -> pd.Series:
        return self.data["g_poa"]

    @property
    def ws(self) -> pd.Series:
        return self.data["ws"]


@dataclass(frozen=True)
class FilterSpec:
    """Row filter used ahead of coefficient regressions.

    Parameters
    ----------
    g_min : float
        Rows need ``g_poa > g_min`` [W/m^2].
    ws_min, ws_max : float
        Rows need ``ws_min <= ws <= ws_max`` [m/s].
    max_ws_variation : float, optional
        If set, rows need ``|ws[t] - ws[t-1]| < max_ws_variation`` [m/s],
        with the difference taken to the previous grid sample.
    resample_window : float
        Averaging window [s] callers apply before filtering.
    """

    g_min: float = 200.0
    ws_min: float = 0.0
    ws_max: float = math.inf
    max_ws_variation: float | None = None
    resample_window: float = 300.0

    def __post_init__(self):
        if self.g_min < 0:
            raise ValueError(f"g_min must be >= 0, got {self.g_min}")
        if not self.ws_min < self.ws_max:
            raise ValueError(f"ws_min ({self.ws_min}) must be < ws_max ({self.ws_max})")
        if self.resample_window <= 0:
            raise ValueError("resample_window must be positive")

    def check_window(self, dt: float) -> None:
        if not _is_multiple(self.resample_window, dt):
            raise ValueError(
                f"resample_window {self.resample_window} s is not a multiple of dt={dt} s")


@dataclass(frozen=True)
class SplitSeries:
    train: WeatherSeries
    test: WeatherSeries


def _is_multiple(value: float, step: float) -> bool:
    ratio = value / step
    return ratio >= 1 - 1e-9 and abs(ratio - round(ratio)) < 1e-9


def _read_delimited(path: Path) -> pd.DataFrame:
    with open(path, "r", newline="") as fh:
        header = fh.readline()
    sep = "\t" if "\t" in header else ","
    return pd.read_csv(path, sep=sep, dtype=str, keep_default_na=False)


def _parse_timestamps(raw: pd.Series) -> pd.Series:
    numeric = pd.to_numeric(raw, errors="coerce")
    if numeric.notna().all() and len(raw):
        return pd.to_datetime(numeric, unit="s")
    parsed = pd.to_datetime(raw, errors="coerce", format="ISO8601")
    return parsed


def load_csv(path, schema: Mapping[str, str], dt_expected: float,
             site_id: str | None = None) -> WeatherSeries:
    """Read a comma- or tab-delimited file into a validated WeatherSeries.

    Parameters
    ----------
    path : path-like
        Delimited text file with a header row.
    schema : mapping
        Maps canonical names (``timestamp``, ``g_poa``, ``t_ambient``,
        ``t_module``, ``ws`` and optionally ``wind_direction``,
        ``rel_humidity``) to column names in the file.
    dt_expected : float
        Recording step [s]. The smallest step found in the file must equal it
        and every step must be a multiple of it.
    site_id : str, optional
        Label carried through to reports; defaults to the file stem.

    Returns
    -------
    WeatherSeries
        Rows with unparseable or out-of-range values are dropped (kept as NaN
        rows on the grid) and counted in ``dropped_count``.

    Raises
    ------
    DataError
        Missing required column, no valid rows, or a step mismatch.
    """
    path = Path(path)
    if not path.exists():
        raise DataError(f"input file not found: {path}")
    missing = [c for c in REQUIRED_COLUMNS if c not in schema]
    if missing:
        raise DataError(f"schema lacks required columns: {', '.join(missing)}")
    raw = _read_delimited(path)
    absent = [schema[c] for c in REQUIRED_COLUMNS if schema[c] not in raw.columns]
    if absent:
        raise DataError(f"{path.name}: missing column(s) {', '.join(absent)}")

    ts = _parse_timestamps(raw[schema["timestamp"]])
    frame = pd.DataFrame(index=raw.index)
    for name in REQUIRED_COLUMNS[1:] + OPTIONAL_COLUMNS:
        if name in schema and schema[name] in raw.columns:
            frame[name] = pd.to_numeric(raw[schema[name]], errors="coerce")

    lo, hi = TEMPERATURE_RANGE
    valid = (
        ts.notna()
        & frame["g_poa"].between(0.0, G_MAX)
        & frame["ws"].between(0.0, WS_MAX)
        & frame["t_ambient"].between(lo, hi)
        & frame["t_module"].between(lo, hi)
    )
    frame.index = pd.DatetimeIndex(ts)
    kept = frame[valid.to_numpy()]
    dropped = int((~valid).sum())
    dup = kept.index.duplicated(keep="first")
    if dup.any():
        dropped += int(dup.sum())
        kept = kept[~dup]
    if kept.empty:
        raise DataError(f"{path.name}: no valid rows retained")
    kept = kept.sort_index()

    step = _check_step(kept.index, dt_expected, path.name)
    grid = pd.date_range(kept.index[0], kept.index[-1], freq=pd.Timedelta(seconds=step))
    data = kept.reindex(grid)
    if dropped:
        logger.info("%s: dropped %d invalid row(s)", path.name, dropped)
    return WeatherSeries(data=data, dt=float(dt_expected),
                         site_id=site_id if site_id is not None else path.stem,
                         dropped_count=dropped)


def _check_step(index: pd.DatetimeIndex, dt_expected: float, label: str) -> float:
    if len(index) < 2:
        return dt_expected
    diffs = np.diff(index.asi8) / 1e9
    step = float(diffs.min())
    if not math.isclose(step, dt_expected, rel_tol=1e-9, abs_tol=1e-6):
        raise DataError(f"{label}: detected step {step:g} s != expected {dt_expected:g} s")
    ratios = diffs / dt_expected
    if np.any(np.abs(ratios - np.round(ratios)) > 1e-6):
        raise DataError(f"{label}: irregular steps that are not multiples of {dt_expected:g} s")
    return dt_expected


def from_frame(frame: pd.DataFrame, dt: float, site_id: str = "") -> WeatherSeries:
    """Wrap an in-memory frame (already on a uniform grid) as a WeatherSeries."""
    missing = [c for c in REQUIRED_COLUMNS[1:] if c not in frame.columns]
    if missing:
        raise DataError(f"frame lacks column(s): {', '.join(missing)}")
    return WeatherSeries(data=frame.copy(), dt=float(dt), site_id=site_id)


def resample_mean(s, window: float):
    """Average a series over consecutive windows of ``window`` seconds.

    Windows start at the first sample. A window with no valid samples yields
    a missing row; nothing is interpolated.
    """
    if window <= 0 or not _is_multiple(window, s.dt):
        raise ValueError(f"window {window} s is not a positive multiple of dt={s.dt} s")
    if round(window / s.dt) == 1:
        return s
    out = s.data.resample(pd.Timedelta(seconds=window), origin="start").mean()
    return dataclasses.replace(s, data=out, dt=float(window))


def over_temperature(s: WeatherSeries) -> OverTempSeries:
    data = pd.DataFrame({
        "t_over": s.data["t_module"] - s.data["t_ambient"],
        "g_poa": s.data["g_poa"],
        "ws": s.data["ws"],
        "t_ambient": s.data["t_ambient"],
    }, index=s.data.index)
    return OverTempSeries(data=data, dt=s.dt, site_id=s.site_id)


def _mask_and_trim(s: WeatherSeries, keep: np.ndarray) -> WeatherSeries:
    data = s.data.copy()
    data.loc[~keep, :] = np.nan
    valid = data[["g_poa", "t_ambient", "t_module", "ws"]].notna().all(axis=1).to_numpy()
    if valid.any():
        first, last = np.flatnonzero(valid)[[0, -1]]
        data = data.iloc[first:last + 1]
    else:
        data = data.iloc[0:0]
    return dataclasses.replace(s, data=data)


def split_weekday_weekend(s: WeatherSeries) -> SplitSeries:
    """Split into weekday (train) and weekend (test) series by local calendar day.

    Public holidays get no special treatment. Each part keeps the uniform
    grid, with the other part's rows blanked out.
    """
    weekday = s.data.index.dayofweek < 5
    train = _mask_and_trim(s, weekday)
    test = _mask_and_trim(s, ~weekday)
    if train.n_valid == 0:
        raise DataError("weekday/weekend split left the training (weekday) set empty")
    if test.n_valid == 0:
        raise DataError("weekday/weekend split left the test (weekend) set empty")
    return SplitSeries(train=train, test=test)


def filter_rows(s: OverTempSeries, spec: FilterSpec) -> OverTempSeries:
    d = s.data
    keep = (
        d["t_over"].notna()
        & (d["g_poa"] > spec.g_min)
        & (d["ws"] >= spec.ws_min)
        & (d["ws"] <= spec.ws_max)
    )
    if spec.max_ws_variation is not None:
        keep &= d["ws"].diff().abs() < spec.max_ws_variation
    return dataclasses.replace(s, data=d[keep.to_numpy()])


def ws_quantile(s, q: float) -> float:
    """Linear-interpolation quantile of the wind speed distribution."""
    if not 0.0 <= q <= 1.0:
        raise ValueError(f"q must lie in [0, 1], got {q}")
    ws = s.data["ws"].dropna().to_numpy()
    if ws.size == 0:
        raise DataError("cannot take a wind speed quantile of an empty series")
    return float(np.quantile(ws, q))


def daytime_std(s, g_threshold: float = 20.0, column: str = "ws") -> float:
    d = s.data
    vals = d.loc[d["g_poa"] > g_threshold, column].dropna()
    return float(vals.std()) if len(vals) > 1 else float("nan")
