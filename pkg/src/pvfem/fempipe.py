"""
Filter, EWM and MBE correction pipeline (FEM).

Coefficients and the time constant are fitted on the training (weekday)
part only. The static model is then evaluated on the EWM of irradiance and
wind speed, and the mean bias of that dynamic model on the training set is
subtracted from every prediction.

Sign convention: ``MBE = mean(predicted - measured)``, so the FEM
prediction is ``EWM prediction - MBE_train`` and the reported
``correction`` equals ``-MBE_train``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from . import fitting as fit
from . import models as m
from .ewm import EwmParams, dynamicize
from .metrics import DAYTIME_G, KpiReport, daytime_mask, kpis
from .timeseries import OverTempSeries, SplitSeries, WeatherSeries, over_temperature, resample_mean

logger = logging.getLogger(__name__)

VARIANTS = ("static", "ewm", "fem")
MBE_MODES = ("daytime", "night")


@dataclass(frozen=True)
class FemOptions:
    """Pipeline switches beyond the fitting constants.

    ``mbe_mode='night'`` takes the training bias over night rows instead of
    daytime rows, for comparison only.
    """

    tau: float | None = None            # s, overrides the estimate
    daytime_g: float = DAYTIME_G
    mbe_mode: str = "daytime"

    def __post_init__(self):
        if self.tau is not None and not self.tau > 0:
            raise ValueError(f"tau override must be positive, got {self.tau}")
        if self.mbe_mode not in MBE_MODES:
            raise ValueError(f"mbe_mode must be one of {MBE_MODES}")


@dataclass(frozen=True)
class FemRun:
    model: str
    coefficients: m.ModelCoefficients
    tau_selected: float
    alpha: float
    mbe_train: float
    test: OverTempSeries
    test_predictions: dict[str, pd.Series]
    train: OverTempSeries
    train_predictions: dict[str, pd.Series]
    tau_estimate: fit.TauEstimate | None = None
    r_eq_max: fit.RegressionResult | None = None
    warnings: list[str] = field(default_factory=list)

    @property
    def correction(self) -> float:
        return -self.mbe_train

    @property
    def tau_source(self) -> str:
        return "estimated" if self.tau_estimate is not None else "override"


def _averaged(s: OverTempSeries, window: float) -> OverTempSeries:
    if s.dt >= window or (window / s.dt) % 1:
        return s
    return resample_mean(s, window)


def _bias_mask(g: pd.Series, options: FemOptions) -> np.ndarray:
    day = daytime_mask(g, options.daytime_g)
    if options.mbe_mode == "night":
        return np.isfinite(np.asarray(g, dtype=float)) & ~day
    return day


def _variants(coeffs, s: OverTempSeries, params: EwmParams, mbe: float) -> dict[str, pd.Series]:
    static = coeffs.predict(s.g_poa, s.ws)
    ewm = dynamicize(coeffs, s.g_poa, s.ws, params).t_over_pred
    return {"static": static, "ewm": ewm, "fem": ewm - mbe}


def run_fem(model: str, split: SplitSeries, settings: fit.FitSettings = fit.DEFAULT_SETTINGS,
            options: FemOptions = FemOptions()) -> FemRun:
    """Fit ``model`` on the training part and predict all variants on both parts.

    Steps: average the training series to ``settings.resample_window`` and
    fit the static coefficients; estimate and select ``tau`` on the
    native training series (unless ``options.tau`` is set); evaluate the
    static and EWM variants; take ``MBE_train`` of the EWM variant over the
    bias mask and subtract it to get the FEM variant.

    Raises
    ------
    FitError
        From any fitting stage, labelled with that stage.
    """
    model = model.lower()
    m.model_class(model)
    train = over_temperature(split.train)
    test = over_temperature(split.test)
    if train.n_valid == 0 or test.n_valid == 0:
        raise fit.FitError("train or test set has no valid rows", "split")
    if train.dt != test.dt:
        raise fit.FitError("train and test sets have different steps", "split")
    averaged = _averaged(train, settings.resample_window)

    warnings: list[str] = []
    r_max = None
    if model in ("wm1", "wm2") or options.tau is None:
        r_max = fit.fit_r_eq_max(averaged, settings)
    k = r_max.slope if r_max is not None else None
    coeffs = fit.fit_static(model, averaged, settings=settings, k=k)
    if coeffs.provenance.get("replaced"):
        warnings.append(f"{model}: Faiman coefficient(s) replaced by standard values")

    est = None
    if options.tau is None:
        est = fit.estimate_tau(train, r_max.slope, settings)
        tau = est.tau_selected
        warnings.extend(f"tau: {w}" for w in est.warnings)
    else:
        tau = float(options.tau)
    params = EwmParams(tau, train.dt)

    train_pred = _variants(coeffs, train, params, 0.0)
    resid = (train_pred["ewm"] - train.t_over).to_numpy()
    mask = _bias_mask(train.g_poa, options) & np.isfinite(resid)
    if not mask.any():
        raise fit.FitError("no rows to compute the training bias on", "mbe")
    mbe = math.fsum(resid[mask]) / int(mask.sum())
    train_pred["fem"] = train_pred["ewm"] - mbe
    test_pred = _variants(coeffs, test, params, mbe)
    logger.info("%s: tau=%.1f s, MBE_train=%.4f K", model, tau, mbe)

    return FemRun(model, coeffs, tau, params.alpha, mbe, test, test_pred,
                  train, train_pred, est, r_max, warnings)


@dataclass(frozen=True)
class VariantComparison:
    """KPIs of each variant plus the static-to-FEM changes."""

    reports: dict[str, KpiReport]
    delta_rmse: float
    delta_rmse_pct: float
    delta_mae: float
    delta_abs_mbe: float

    def rows(self) -> list[dict]:
        return [r.to_dict() for r in self.reports.values()]


def evaluate_variants(run: FemRun, test: OverTempSeries | None = None,
                      daytime_g: float = DAYTIME_G, dataset: str | None = None) -> VariantComparison:
    """RMSE, MAE and MBE of every variant over daytime test rows."""
    test = test if test is not None else run.test
    if test.n_valid == 0:
        raise ValueError("empty test set")
    mask = daytime_mask(test.g_poa, daytime_g)
    name = test.site_id if dataset is None else dataset
    reports = {v: kpis(run.test_predictions[v], test.t_over, mask, dataset=name,
                       model=run.model, variant=v) for v in VARIANTS}
    std, fem = reports["static"], reports["fem"]
    return VariantComparison(
        reports=reports,
        delta_rmse=fem.rmse - std.rmse,
        delta_rmse_pct=100.0 * (fem.rmse - std.rmse) / std.rmse if std.rmse > 0 else 0.0,
        delta_mae=fem.mae - std.mae,
        delta_abs_mbe=abs(fem.mbe) - abs(std.mbe),
    )


def train_kpis(run: FemRun, daytime_g: float = DAYTIME_G) -> dict[str, KpiReport]:
    mask = daytime_mask(run.train.g_poa, daytime_g)
    return {v: kpis(run.train_predictions[v], run.train.t_over, mask, dataset=run.train.site_id,
                    model=run.model, variant=v) for v in VARIANTS}


@dataclass(frozen=True)
class DatasetFit:
    """Everything fitted on one training set, for reporting."""

    site_id: str
    coefficients: dict[str, m.ModelCoefficients]
    failures: dict[str, str]
    r_eq_max: fit.RegressionResult
    r_m: fit.RegressionResult | None
    tau_estimate: fit.TauEstimate | None
    rc: fit.EmpiricalRc | None
    warnings: list[str]

    def table_row(self) -> dict:
        """One row with the empirical RC columns (mK/(W/m^2), kJ/(K m^2), s, s/m)."""
        row = {"site": self.site_id}
        if self.rc is not None:
            row.update(self.rc.table_row())
        else:
            row["r_eq_max"] = self.r_eq_max.slope * 1e3
            if self.r_m is not None:
                row["r_m"] = self.r_m.slope * 1e3
                row["r_film"] = (self.r_eq_max.slope - self.r_m.slope) * 1e3
        return row


def fit_dataset(series: WeatherSeries, models=m.MODEL_NAMES,
                settings: fit.FitSettings = fit.DEFAULT_SETTINGS) -> DatasetFit:
    """Fit every requested model plus the empirical RC values on ``series``.

    Per-model failures are collected rather than raised; a failing zero-wind
    R-value fit is fatal because every later stage needs it.
    """
    s = over_temperature(series)
    averaged = _averaged(s, settings.resample_window)
    r_max = fit.fit_r_eq_max(averaged, settings)
    warnings: list[str] = []

    try:
        r_m = fit.fit_r_eq_min(averaged, settings)
        warnings.extend(f"r_m: {w}" for w in r_m.meta.get("warnings", []))
    except fit.FitError as exc:
        r_m = None
        warnings.append(str(exc))
    try:
        est = fit.estimate_tau(s, r_max.slope, settings)
        warnings.extend(f"tau: {w}" for w in est.warnings)
    except fit.FitError as exc:
        est = None
        warnings.append(str(exc))
    rc = None
    if r_m is not None and est is not None:
        try:
            rc = fit.empirical_rc(r_max.slope, r_m.slope, est)
        except fit.FitError as exc:
            warnings.append(str(exc))

    coeffs, failures = {}, {}
    for name in models:
        try:
            c = fit.fit_static(name, averaged, settings=settings, k=r_max.slope)
        except fit.FitError as exc:
            failures[name] = str(exc)
            continue
        if c.provenance.get("replaced"):
            warnings.append(f"{name}: coefficient(s) replaced by standard values")
        coeffs[name] = c
    return DatasetFit(series.site_id, coeffs, failures, r_max, r_m, est, rc, warnings)
