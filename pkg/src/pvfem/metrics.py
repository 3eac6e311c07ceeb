"""
Error metrics for over-temperature predictions and their translation into
energy and performance ratio (PR) errors.

Errors are ``e = predicted - measured`` in K. Energy errors use a linear
power temperature coefficient ``gamma`` in %/K (negative for silicon) and
are normalised per kWp with ``G_STC = 1000 W/m^2``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass

import numpy as np
import pandas as pd

from .ewm import EwmParams, ewm_series

logger = logging.getLogger(__name__)

G_STC = 1000.0
DAYTIME_G = 20.0
# Absolute slack for the RMSE >= MAE >= |MBE| check, covering float rounding.
_KPI_SLACK = 1e-9


@dataclass(frozen=True)
class KpiReport:
    rmse: float
    mae: float
    mbe: float
    n_rows: int
    dataset: str = ""
    model: str = ""
    variant: str = ""

    def __post_init__(self):
        if not (self.rmse + _KPI_SLACK >= self.mae and self.mae + _KPI_SLACK >= abs(self.mbe)):
            raise AssertionError(f"KPI ordering violated: {self}")

    def to_dict(self) -> dict:
        return asdict(self)


def _aligned(pred, meas, mask=None) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(pred, pd.Series) and isinstance(meas, pd.Series):
        if not pred.index.equals(meas.index):
            pred, meas = pred.align(meas, join="inner")
    p = np.asarray(pred, dtype=float)
    m = np.asarray(meas, dtype=float)
    if p.shape != m.shape:
        raise ValueError(f"prediction and measurement lengths differ: {p.shape} vs {m.shape}")
    ok = np.isfinite(p) & np.isfinite(m)
    if mask is not None:
        ok &= np.asarray(mask, dtype=bool)
    return p[ok], m[ok]


def kpis(pred, meas, mask=None, dataset: str = "", model: str = "",
         variant: str = "") -> KpiReport:
    """RMSE, MAE and MBE of ``pred - meas`` over rows where both are valid.

    Parameters
    ----------
    pred, meas : array-like or pandas.Series
        Series are aligned on their index first.
    mask : array-like of bool, optional
        Extra row selection, e.g. :func:`daytime_mask`.
    """
    p, m = _aligned(pred, meas, mask)
    if p.size == 0:
        raise ValueError("no overlapping valid rows between prediction and measurement")
    e = p - m
    return KpiReport(
        rmse=math.sqrt(math.fsum(e * e) / e.size),
        mae=math.fsum(np.abs(e)) / e.size,
        mbe=math.fsum(e) / e.size,
        n_rows=int(e.size),
        dataset=dataset, model=model, variant=variant,
    )


def daytime_mask(g, threshold: float = DAYTIME_G) -> np.ndarray:
    """Rows with ``G > threshold``; missing irradiance counts as night."""
    g = np.asarray(g, dtype=float)
    with np.errstate(invalid="ignore"):
        return np.isfinite(g) & (g > threshold)


@dataclass(frozen=True)
class EnergyErrorReport:
    """Energy error caused by the temperature model error, in kWh/kWp.

    ``e_over`` is the energy over-estimate caused by under-predicted
    temperatures (>= 0 for negative ``gamma``) and ``e_under`` the
    under-estimate caused by over-predicted temperatures (<= 0).
    """

    e_total: float
    e_over: float
    e_under: float
    e_naive: float
    pr_approx: float        # %-points, MAE * |gamma|
    gamma: float            # %/K
    h_y: float | None       # kWh/m^2 over the evaluated period
    e_approx: float | None  # kWh/kWp, H_y * MAE * |gamma|
    pr_total: float | None  # %-points, 100 * e_total / H_y
    mae: float
    n_rows: int

    def to_dict(self) -> dict:
        return asdict(self)


def energy_error(pred, meas, g, gamma: float, dt: float, h_y: float | None = None,
                 full_year: bool = False, mask=None) -> EnergyErrorReport:
    """Absolute and directional energy error from a temperature model error.

    Each row contributes ``G/G_STC * dt/3600 * e * gamma / 100`` kWh/kWp
    (left-rectangle integration). The total uses ``|e| * |gamma|``; the
    directional parts keep the signs, so ``e_total = e_over - e_under`` and
    ``e_naive = e_over + e_under``.

    Parameters
    ----------
    pred, meas, g : array-like
        Predicted and measured over-temperature [K], irradiance [W/m^2].
    gamma : float
        Power temperature coefficient [%/K]; must not be positive.
    dt : float
        Step [s].
    h_y : float, optional
        Irradiation [kWh/m^2] used for the approximate and PR figures.
    full_year : bool
        If true and ``h_y`` is not given, ``h_y`` is integrated from ``g``.
    mask : array-like of bool, optional
        Rows used for ``mae``; all valid rows by default. Energy sums always
        use every valid row since night rows carry zero weight.
    """
    if gamma > 0:
        raise ValueError(f"gamma must be <= 0 %/K, got {gamma}")
    if not dt > 0:
        raise ValueError("dt must be positive")
    p = np.asarray(pred, dtype=float)
    m = np.asarray(meas, dtype=float)
    gg = np.asarray(g, dtype=float)
    if not p.shape == m.shape == gg.shape:
        raise ValueError("pred, meas and g must have the same length")
    ok = np.isfinite(p) & np.isfinite(m) & np.isfinite(gg)
    if not ok.any():
        raise ValueError("no valid rows for the energy error")
    e = p[ok] - m[ok]
    w = gg[ok] / G_STC * dt / 3600.0
    if h_y is None and full_year:
        h_y = math.fsum(np.clip(gg[np.isfinite(gg)], 0.0, None) / G_STC * dt / 3600.0)
    sel = ok if mask is None else ok & np.asarray(mask, dtype=bool)
    if not sel.any():
        raise ValueError("no rows selected for the MAE")
    mae = math.fsum(np.abs(p[sel] - m[sel])) / int(sel.sum())
    if gamma == 0:
        logger.warning("gamma = 0: energy error is zero by definition")
    e_total = math.fsum(w * np.abs(e)) * abs(gamma) / 100.0
    e_over = math.fsum(w * np.minimum(e, 0.0)) * gamma / 100.0
    e_under = math.fsum(w * np.maximum(e, 0.0)) * gamma / 100.0
    have_h = h_y is not None and h_y > 0
    return EnergyErrorReport(
        e_total=e_total,
        e_over=e_over,
        e_under=e_under,
        e_naive=e_over + e_under,
        pr_approx=mae * abs(gamma),
        gamma=gamma,
        h_y=h_y,
        e_approx=h_y * mae * abs(gamma) / 100.0 if have_h else None,
        pr_total=100.0 * e_total / h_y if have_h else None,
        mae=mae,
        n_rows=int(e.size),
    )


def delayed_sensor_baseline(meas: pd.Series, delays, dt: float, g=None,
                            g_threshold: float = DAYTIME_G, dataset: str = "") -> list[KpiReport]:
    """KPIs of a perfect sensor whose readings arrive ``delay`` seconds late.

    The delayed signal at ``t`` is ``meas[t - delay]``. When ``g`` is given
    only daytime rows are scored.
    """
    values = np.asarray(meas, dtype=float)
    mask = None if g is None else daytime_mask(g, g_threshold)
    out = []
    for delay in delays:
        steps = delay / dt
        if delay < 0 or abs(steps - round(steps)) > 1e-9:
            raise ValueError(f"delay {delay} s is not a non-negative multiple of dt={dt} s")
        steps = int(round(steps))
        if steps >= values.size:
            raise ValueError(f"delay {delay} s is not shorter than the series")
        shifted = np.full_like(values, np.nan)
        shifted[steps:] = values[:values.size - steps]
        out.append(kpis(shifted, values, mask, dataset=dataset, model="delayed_sensor",
                        variant=f"delay_{delay:g}s"))
    return out


def backsheet_to_cell(t_bs, g, k_bsc: float, params: EwmParams):
    """Cell temperature from a backsheet reading: ``T_bs + EWM(G) * k_bsc``."""
    if k_bsc < 0:
        raise ValueError(f"k_bsc must be >= 0, got {k_bsc}")
    g_ewm = ewm_series(g, params.alpha)
    if isinstance(t_bs, pd.Series):
        return t_bs + np.asarray(g_ewm, dtype=float) * k_bsc
    return np.asarray(t_bs, dtype=float) + np.asarray(g_ewm, dtype=float) * k_bsc
