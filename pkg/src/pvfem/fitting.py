"""
Coefficient determination from measured over-temperature data.

The regressions here work on series that were averaged to (at least)
5 minutes so that they approximate steady state. The exception is
:func:`estimate_tau`, which takes the native series and averages it itself.
"""

from __future__ import annotations

import dataclasses
import logging
import math
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from . import models as m
from .timeseries import FilterSpec, OverTempSeries, daytime_std, filter_rows, resample_mean

logger = logging.getLogger(__name__)


class FitError(ValueError):
    """A regression could not be carried out; ``stage`` names the step."""

    def __init__(self, message: str, stage: str = ""):
        super().__init__(f"[{stage}] {message}" if stage else message)
        self.stage = stage


@dataclass(frozen=True)
class FitSettings:
    """Every tunable constant of the fitting recipes, in one place."""

    g_min: float = 200.0                       # W/m^2, daylight / heating filter
    low_wind_max: float = 0.5                  # m/s, "zero wind" rows for r_eq_max
    high_wind_band: tuple[float, float] = (6.0, 8.0)   # m/s, rows for r_M
    ws_cap: float = 8.0                        # m/s, WM2 clip
    resample_window: float = 300.0             # s
    ws_bin_width: float = 1.0                  # m/s, tau bins
    ws_bins_max: float = 8.0                   # m/s
    step_intervals: int = 4                    # averaging intervals between step endpoints
    g_bin_width: float = 20.0                  # W/m^2, k_W bins
    kw_g_range: tuple[float, float] = (200.0, 1000.0)
    kw_ws_range: tuple[float, float] = (0.5, 8.0)
    tau_margin: float = 20.0                   # s
    tau_low_ws: float = 2.0                    # m/s, tau0 search range upper end
    min_samples: int = 30
    min_events: int = 20
    daytime_g: float = 20.0                    # W/m^2
    min_t_over: float = 0.5                    # K, floor before logs / ratios
    faiman_u0_default: float = m.FAIMAN_U0_DEFAULT
    faiman_u1_default: float = m.FAIMAN_U1_DEFAULT
    faiman_u0_range: tuple[float, float] = (5.0, 80.0)
    faiman_u1_range: tuple[float, float] = (0.0, 30.0)

    def static_filter(self) -> FilterSpec:
        return FilterSpec(g_min=self.g_min, resample_window=self.resample_window)


DEFAULT_SETTINGS = FitSettings()


# --- ordinary least squares ------------------------------------------------

@dataclass(frozen=True)
class RegressionResult:
    slope: float
    intercept: float
    n_samples: int
    r2: float
    meta: dict = field(default_factory=dict, compare=False)


def ols(x, y, min_samples: int = DEFAULT_SETTINGS.min_samples, through_origin: bool = False,
        stage: str = "ols") -> RegressionResult:
    """Ordinary least squares of ``y`` on ``x``.

    Sums use :func:`math.fsum`, so the result does not depend on row order.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    ok = np.isfinite(x) & np.isfinite(y)
    x, y = x[ok], y[ok]
    n = x.size
    if n < min_samples:
        raise FitError(f"{n} usable samples, need at least {min_samples}", stage)
    if through_origin:
        sxx = math.fsum(x * x)
        if sxx == 0:
            raise FitError("degenerate regressor (all zero)", stage)
        slope = math.fsum(x * y) / sxx
        intercept = 0.0
        resid = y - slope * x
        syy = math.fsum(y * y)
    else:
        mx = math.fsum(x) / n
        my = math.fsum(y) / n
        dx, dy = x - mx, y - my
        sxx = math.fsum(dx * dx)
        if sxx <= 1e-12 * max(1.0, mx * mx) * n:
            raise FitError("degenerate regressor (zero variance)", stage)
        slope = math.fsum(dx * dy) / sxx
        intercept = my - slope * mx
        resid = dy - slope * dx
        syy = math.fsum(dy * dy)
    sse = math.fsum(resid * resid)
    r2 = 1.0 - sse / syy if syy > 0 else 1.0
    return RegressionResult(slope, intercept, n, r2)


# --- R-values ----------------------------------------------------------------

def fit_r_eq_max(s: OverTempSeries, settings: FitSettings = DEFAULT_SETTINGS) -> RegressionResult:
    """Slope of ``T_o`` versus ``G`` at near-zero wind: the maximum R-value."""
    spec = FilterSpec(g_min=settings.g_min, ws_min=0.0, ws_max=settings.low_wind_max,
                      resample_window=settings.resample_window)
    rows = filter_rows(s, spec).data
    res = ols(rows["g_poa"], rows["t_over"], settings.min_samples, stage="r_eq_max")
    return dataclasses.replace(res, meta={"ws_band": [0.0, settings.low_wind_max]})


def fit_r_eq_min(s: OverTempSeries, settings: FitSettings = DEFAULT_SETTINGS,
                 band: tuple[float, float] | None = None) -> RegressionResult:
    """Slope of ``T_o`` versus ``G`` at high wind, approximating ``r_M``.

    If the band holds too few rows its lower edge is lowered in 1 m/s steps
    (never below the zero-wind cutoff) and a warning is recorded in ``meta``.
    """
    lo, hi = band if band is not None else settings.high_wind_band
    warnings = []
    while True:
        spec = FilterSpec(g_min=settings.g_min, ws_min=lo, ws_max=hi,
                          resample_window=settings.resample_window)
        rows = filter_rows(s, spec).data
        try:
            res = ols(rows["g_poa"], rows["t_over"], settings.min_samples, stage="r_eq_min")
            break
        except FitError:
            if lo - 1.0 <= settings.low_wind_max:
                raise FitError(f"too few high-wind rows even with band widened to "
                               f"[{lo:g}, {hi:g}] m/s", "r_eq_min") from None
            lo -= 1.0
            msg = f"high-wind band widened downward to [{lo:g}, {hi:g}] m/s"
            logger.warning(msg)
            warnings.append(msg)
    return dataclasses.replace(res, meta={"ws_band": [lo, hi], "warnings": warnings})


# --- static model coefficients ----------------------------------------------

def _provenance(s: OverTempSeries, spec: FilterSpec, n: int, **extra) -> dict:
    out = {
        "dataset": s.site_id,
        "filter": dataclasses.asdict(spec),
        "n_samples": int(n),
        "n_input": int(s.n_valid),
    }
    out.update(extra)
    return out


def fit_static(model: str, s: OverTempSeries, spec: FilterSpec | None = None,
               settings: FitSettings = DEFAULT_SETTINGS, k: float | None = None):
    """Fit one of the five static models.

    Parameters
    ----------
    model : {'ross', 'sandia', 'faiman', 'wm1', 'wm2'}
    s : OverTempSeries
        Typically 5-minute averages.
    spec : FilterSpec, optional
        Rows used for the regression; defaults to ``G > g_min`` at any wind.
    settings : FitSettings
    k : float, optional
        Zero-wind R-value for WM1/WM2. Fitted with :func:`fit_r_eq_max` when
        omitted.

    Notes
    -----
    Linearisations: Ross regresses ``T_o`` on ``G``; Sandia ``ln(T_o/G)`` on
    ``WS``; Faiman ``G/T_o`` on ``WS``; WM1 fixes ``k`` and regresses
    ``ln(T_o/(k G))`` on ``WS``, the slope giving ``-1/d``; WM2
    fixes ``k`` and takes ``k_W`` from :func:`fit_wm2_kw`. Rows with
    ``T_o <= min_t_over`` are dropped before logs and ratios.
    """
    model = model.lower()
    spec = spec or settings.static_filter()
    rows = filter_rows(s, spec).data
    g, to, ws = rows["g_poa"], rows["t_over"], rows["ws"]
    warm = to > settings.min_t_over

    if model == "ross":
        res = ols(g, to, settings.min_samples, stage="ross")
        return m.Ross(res.slope, provenance=_provenance(
            s, spec, res.n_samples, intercept=res.intercept, r2=res.r2))

    if model in ("sandia", "faiman", "wm1") and warm.sum() == 0:
        raise FitError("no rows with positive over-temperature after filtering", model)

    if model == "sandia":
        res = ols(ws[warm], np.log(to[warm] / g[warm]), settings.min_samples, stage="sandia")
        return m.Sandia(res.intercept, res.slope, provenance=_provenance(
            s, spec, res.n_samples, r2=res.r2))

    if model == "faiman":
        res = ols(ws[warm], g[warm] / to[warm], settings.min_samples, stage="faiman")
        u0, u1 = res.intercept, res.slope
        replaced = []
        lo, hi = settings.faiman_u0_range
        if not lo <= u0 <= hi:
            replaced.append(("u0", u0))
            u0 = settings.faiman_u0_default
        lo, hi = settings.faiman_u1_range
        if not lo <= u1 <= hi:
            replaced.append(("u1", u1))
            u1 = settings.faiman_u1_default
        prov = _provenance(s, spec, res.n_samples, r2=res.r2,
                           replaced={name: val for name, val in replaced})
        if replaced:
            logger.warning("Faiman fit outlier(s) %s replaced by standard values", replaced)
        return m.Faiman(u0, u1, provenance=prov)

    if model in ("wm1", "wm2") and k is None:
        k = fit_r_eq_max(s, settings).slope
    if model in ("wm1", "wm2") and not k > 0:
        raise FitError(f"zero-wind R-value must be positive, got {k}", model)

    if model == "wm1":
        w = ws[warm]
        if w.size and np.nanstd(w) < 1e-9:
            raise FitError("no wind speed variance; d is unidentifiable", "wm1")
        y = np.log(to[warm] / (k * g[warm]))
        res = ols(w, y, settings.min_samples, stage="wm1")
        if not res.slope < 0:
            raise FitError(f"non-negative wind slope {res.slope:g}; no wind cooling", "wm1")
        return m.WM1(k, -1.0 / res.slope, provenance=_provenance(
            s, spec, res.n_samples, intercept=res.intercept, r2=res.r2))

    if model == "wm2":
        k_w, diag = fit_wm2_kw(s, settings)
        coeffs = m.WM2(k, k_w, settings.ws_cap, provenance={
            "dataset": s.site_id, "n_input": int(s.n_valid), **diag})
        if not coeffs.non_negative:
            raise FitError(f"k - k_W*ws_cap = {k - k_w * settings.ws_cap:g} < 0; "
                           "predictions would turn negative at high wind", "wm2")
        return coeffs

    raise ValueError(f"unknown model {model!r}")


def fit_wm2_kw(s: OverTempSeries, settings: FitSettings = DEFAULT_SETTINGS) -> tuple[float, dict]:
    """WM2 wind coefficient from a regression of per-irradiance-bin slopes.

    For each irradiance bin the slope ``m_W`` of ``T_o`` versus ``WS`` is
    found; ``k_W`` is minus the slope of ``m_W`` versus the bin centre.
    """
    d = s.data
    g_lo, g_hi = settings.kw_g_range
    ws_lo, ws_hi = settings.kw_ws_range
    base = d[d["t_over"].notna() & d["ws"].between(ws_lo, ws_hi)]
    edges = np.arange(g_lo, g_hi + 1e-9, settings.g_bin_width)
    centres, slopes, counts, skipped = [], [], [], []
    for lo, hi in zip(edges[:-1], edges[1:]):
        rows = base[(base["g_poa"] >= lo) & (base["g_poa"] < hi)]
        centre = 0.5 * (lo + hi)
        try:
            res = ols(rows["ws"], rows["t_over"], settings.min_samples, stage="wm2_bin")
        except FitError as exc:
            skipped.append({"g_centre": centre, "n": int(len(rows)), "reason": str(exc)})
            continue
        centres.append(centre)
        slopes.append(res.slope)
        counts.append(res.n_samples)
    if len(centres) < 3:
        raise FitError(f"only {len(centres)} usable irradiance bins, need 3", "wm2_kw")
    outer = ols(centres, slopes, min_samples=3, stage="wm2_kw")
    diag = {
        "bins": [{"g_centre": c, "m_w": sl, "n": n} for c, sl, n in zip(centres, slopes, counts)],
        "skipped_bins": skipped,
        "outer_intercept": outer.intercept,
        "outer_r2": outer.r2,
    }
    return -outer.slope, diag


def wm2_mean_inverse_h(g, k_w: float, g_min: float = 0.0) -> float:
    """Diagnostic mean of ``1/h = G k_W`` over rows with ``G > g_min``."""
    g = np.asarray(g, dtype=float)
    g = g[np.isfinite(g) & (g > g_min)]
    return float(np.mean(g * k_w)) if g.size else float("nan")


# --- thermal time constant -----------------------------------------------------

@dataclass(frozen=True)
class TauBin:
    ws_lo: float
    ws_hi: float
    tau: float | None
    n_events: int
    slope: float | None = None
    excluded: bool = False
    reason: str = ""

    @property
    def ws_centre(self) -> float:
        return 0.5 * (self.ws_lo + self.ws_hi)


@dataclass(frozen=True)
class TauEstimate:
    bins: list[TauBin]
    tau0: float
    f: float
    tau_selected: float
    horizon: float
    sigma_ws: float
    warnings: list[str] = field(default_factory=list)

    @property
    def retained(self) -> list[TauBin]:
        return [b for b in self.bins if not b.excluded]

    @property
    def excluded_bins(self) -> list[TauBin]:
        return [b for b in self.bins if b.excluded]

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame([{
            "ws_lo": b.ws_lo, "ws_hi": b.ws_hi, "ws_centre": b.ws_centre,
            "tau_s": b.tau, "n_events": b.n_events, "slope": b.slope,
            "excluded": b.excluded, "reason": b.reason,
        } for b in self.bins])


def estimate_tau(s: OverTempSeries, k: float, settings: FitSettings = DEFAULT_SETTINGS,
                 sigma_ws: float | None = None) -> TauEstimate:
    """Thermal time constant per wind speed bin from sustained step changes.

    The series is averaged to ``resample_window`` (5 min by default).
    Differences of ``T_o`` and ``G`` are taken ``step_intervals`` samples
    apart (20 min by default); for each 1 m/s wind bin the slope of
    ``dT_o/dt`` versus ``dG/dt`` gives ``tau = slope / k * horizon``.
    Rows need ``G > g_min`` and wind inside the bin at both ends, and a
    wind change below the daytime wind standard deviation. Finally
    ``ln tau = g - WS/f`` is fitted over the retained bins, giving
    ``tau0 = exp(g)`` and ``f``.

    Parameters
    ----------
    s : OverTempSeries
        Native-resolution series on a uniform grid.
    k : float
        Zero-wind R-value (K per W/m^2) from :func:`fit_r_eq_max`.
    sigma_ws : float, optional
        Wind variation threshold; defaults to the daytime standard deviation
        of the averaged wind speed of ``s``.
    """
    if not k > 0:
        raise FitError(f"k must be positive, got {k}", "tau")
    window = settings.resample_window
    if s.dt >= window or window % s.dt:
        window = s.dt
    r = resample_mean(s, window).data
    if sigma_ws is None:
        sigma_ws = daytime_std(resample_mean(s, window), settings.daytime_g)
    h = int(settings.step_intervals)
    horizon = h * window

    to, g, ws = r["t_over"].to_numpy(), r["g_poa"].to_numpy(), r["ws"].to_numpy()
    to0, g0, ws0 = _lag(to, h), _lag(g, h), _lag(ws, h)
    d_to, d_g, d_ws = to - to0, g - g0, ws - ws0
    base = (np.isfinite(d_to) & np.isfinite(d_g) & np.isfinite(d_ws)
            & (g > settings.g_min) & (g0 > settings.g_min)
            & (np.abs(d_ws) < sigma_ws))

    bins = []
    n_bins = int(round(settings.ws_bins_max / settings.ws_bin_width))
    for i in range(n_bins):
        lo = i * settings.ws_bin_width
        hi = lo + settings.ws_bin_width
        sel = base & (ws >= lo) & (ws < hi) & (ws0 >= lo) & (ws0 < hi)
        n = int(sel.sum())
        if n < settings.min_events:
            bins.append(TauBin(lo, hi, None, n, excluded=True,
                               reason=f"{n} step events < {settings.min_events}"))
            continue
        try:
            res = ols(d_g[sel] / horizon, d_to[sel] / horizon, settings.min_events, stage="tau_bin")
        except FitError as exc:
            bins.append(TauBin(lo, hi, None, n, excluded=True, reason=str(exc)))
            continue
        tau = res.slope / k * horizon
        if not tau > 0:
            bins.append(TauBin(lo, hi, tau, n, res.slope, True, "non-positive tau"))
            continue
        bins.append(TauBin(lo, hi, tau, n, res.slope))

    kept = [b for b in bins if not b.excluded]
    if not kept:
        raise FitError("no wind speed bin has enough step events", "tau")
    warnings = []
    if len(kept) >= 2:
        fit = ols([b.ws_centre for b in kept], np.log([b.tau for b in kept]),
                  min_samples=2, stage="tau_fit")
        tau0 = math.exp(fit.intercept)
        f = -1.0 / fit.slope if fit.slope < 0 else math.inf
        if fit.slope >= 0:
            warnings.append("tau does not decrease with wind speed; f set to infinity")
    else:
        tau0, f = kept[0].tau, math.inf
        warnings.append("single retained wind bin; exponential fit not possible")
    est = TauEstimate(bins, tau0, f, float("nan"), horizon, sigma_ws, warnings)
    tau_sel, sel_warn = _select(est, settings)
    for w in warnings + sel_warn:
        logger.warning(w)
    return dataclasses.replace(est, tau_selected=tau_sel, warnings=warnings + sel_warn)


def _lag(a: np.ndarray, h: int) -> np.ndarray:
    out = np.full_like(a, np.nan)
    if h < a.size:
        out[h:] = a[:-h]
    return out


def _select(est: TauEstimate, settings: FitSettings) -> tuple[float, list[str]]:
    kept = sorted(est.retained, key=lambda b: b.ws_lo)
    if not kept:
        raise FitError("no retained wind bins to select tau from", "tau_select")
    low = [b for b in kept if b.ws_hi <= settings.tau_low_ws + 1e-9]
    warnings = []
    if not low:
        low = kept[:1]
        warnings.append(f"no retained bin below {settings.tau_low_ws:g} m/s; "
                        "starting from the lowest retained bin")
    start = max(low, key=lambda b: b.tau)
    pos = kept.index(start)
    selected = start.tau
    steps = 0
    for prev, cur in zip(kept[pos:], kept[pos + 1:]):
        if cur.tau > prev.tau + settings.tau_margin:
            break
        selected = cur.tau
        steps += 1
    if steps == 0 and pos + 1 < len(kept):
        warnings.append("tau does not decrease past the low-wind maximum; "
                        "using the low-wind maximum")
    return selected, warnings


def select_tau(est: TauEstimate, settings: FitSettings = DEFAULT_SETTINGS) -> float:
    """Time constant for the EWM: last bin of the monotonic decrease.

    Starting at the largest tau among the bins below ``tau_low_ws`` (0-2
    m/s), walk the retained bins in increasing wind speed and stop before
    the first one exceeding its predecessor by more than ``tau_margin``.
    """
    return _select(est, settings)[0]


# --- empirical RC values -----------------------------------------------------------

@dataclass(frozen=True)
class EmpiricalRc:
    r_eq_max: float     # K/(W/m^2)
    r_m: float
    r_film: float
    c_eq_max: float     # J/(K m^2)
    c_m: float
    c_film: float
    c_eq_min: float
    tau0: float         # s
    f: float            # s/m
    tau_selected: float

    def table_row(self) -> dict:
        """Values in the customary reporting units (mK/(W/m^2), kJ/(K m^2), s)."""
        return {
            "r_eq_max": self.r_eq_max * 1e3, "r_m": self.r_m * 1e3, "r_film": self.r_film * 1e3,
            "c_eq_max": self.c_eq_max / 1e3, "c_m": self.c_m / 1e3, "c_film": self.c_film / 1e3,
            "c_eq_min": self.c_eq_min / 1e3,
            "tau0": self.tau0, "tau": self.tau_selected, "f": self.f,
        }


def empirical_c(tau0: float, tau_selected: float, r_eq_max: float, r_m: float) -> dict:
    """C-values implied by the fitted time constants and R-values.

    ``c_eq_max = tau0 / r_M`` and ``c_M = tau / r_M`` with ``c_film`` their
    difference; ``c_eq_min = tau0 / r_eq_max`` is the zero-wind value.
    """
    if not (r_m > 0 and r_eq_max > 0):
        raise FitError("R-values must be positive", "empirical_c")
    if not (math.isfinite(tau0) and math.isfinite(tau_selected)):
        raise FitError("missing tau fit", "empirical_c")
    c_max = tau0 / r_m
    c_m = tau_selected / r_m
    return {"c_eq_max": c_max, "c_m": c_m, "c_film": c_max - c_m, "c_eq_min": tau0 / r_eq_max}


def empirical_rc(r_eq_max: float, r_m: float, est: TauEstimate) -> EmpiricalRc:
    c = empirical_c(est.tau0, est.tau_selected, r_eq_max, r_m)
    return EmpiricalRc(r_eq_max, r_m, r_eq_max - r_m, c["c_eq_max"], c["c_m"], c["c_film"],
                       c["c_eq_min"], est.tau0, est.f, est.tau_selected)
