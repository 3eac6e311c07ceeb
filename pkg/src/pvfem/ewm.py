"""
Exponential weighted mean (EWM) of input signals, used to turn a static
thermal model into a dynamic one.

With smoothing factor ``alpha = 1 - exp(-dt / tau)`` the EWM at step ``t`` is
the weighted mean of all earlier valid samples ``x[t-i]`` with weights
``(1 - alpha)**i``, normalised by the finite weight sum so that early outputs
are not biased towards zero.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
import pandas as pd
from scipy.signal import lfilter

logger = logging.getLogger(__name__)


def alpha_from(tau: float, dt: float) -> float:
    """Smoothing factor for a first-order lag ``tau`` sampled every ``dt`` s."""
    if not tau > 0 or not dt > 0:
        raise ValueError(f"tau and dt must be positive, got tau={tau}, dt={dt}")
    return -math.expm1(-dt / tau)


def span_from(alpha: float) -> float:
    """Number of steps in the equivalent window, ``2 / alpha - 1``."""
    _check_alpha(alpha)
    return 2.0 / alpha - 1.0


@dataclass(frozen=True)
class EwmParams:
    tau: float
    dt: float

    def __post_init__(self):
        alpha_from(self.tau, self.dt)

    @property
    def alpha(self) -> float:
        return alpha_from(self.tau, self.dt)

    @property
    def span(self) -> float:
        return span_from(self.alpha)


def _check_alpha(alpha: float) -> None:
    if not 0.0 < alpha <= 1.0:
        raise ValueError(f"alpha must lie in (0, 1], got {alpha}")


def ewm_series(x, alpha: float):
    """Recursive, normalised exponential weighted mean.

    Missing inputs give missing outputs. The accumulated state is carried
    across gaps and decays by ``1 - alpha`` per missing step, exactly as if
    the missing samples had zero weight.

    Parameters
    ----------
    x : array-like or pandas.Series
    alpha : float
        Smoothing factor in (0, 1].

    Returns
    -------
    Same type as ``x``.
    """
    _check_alpha(alpha)
    values = np.asarray(x, dtype=float)
    if values.size == 0:
        raise ValueError("cannot take the EWM of an empty series")
    valid = np.isfinite(values)
    beta = 1.0 - alpha
    # Weighted mean of deviations from the first valid sample, so a constant
    # series is reproduced exactly.
    # num[t] = x[t] + beta * num[t-1]; den[t] = 1 + beta * den[t-1], valid steps only
    if beta == 0.0:
        return _like(x, np.where(valid, values, np.nan))
    ref = values[valid][0] if valid.any() else 0.0
    num = lfilter([1.0], [1.0, -beta], np.where(valid, values - ref, 0.0))
    den = lfilter([1.0], [1.0, -beta], valid.astype(float))
    with np.errstate(invalid="ignore", divide="ignore"):
        out = np.where(valid, ref + num / den, np.nan)
    _log_gaps(valid)
    return _like(x, out)


def _like(x, out: np.ndarray):
    if isinstance(x, pd.Series):
        return pd.Series(out, index=x.index, name=x.name)
    return out


def _log_gaps(valid: np.ndarray) -> None:
    if valid.all() or not valid.any():
        return
    first, last = np.flatnonzero(valid)[[0, -1]]
    inner = ~valid[first:last + 1]
    if not inner.any():
        return
    edges = np.diff(np.concatenate(([0], inner.astype(np.int8), [0])))
    lengths = np.flatnonzero(edges == -1) - np.flatnonzero(edges == 1)
    logger.debug("EWM state carried across %d gap(s), longest %d step(s)",
                 lengths.size, int(lengths.max()))


def ewm_weighted_sum(x, alpha: float) -> np.ndarray:
    """Explicit weighted sum over each prefix. O(n^2); reference use only."""
    _check_alpha(alpha)
    values = np.asarray(x, dtype=float)
    out = np.full(values.shape, np.nan)
    beta = 1.0 - alpha
    for t in range(values.size):
        if not np.isfinite(values[t]):
            continue
        hist = values[:t + 1][::-1]
        w = beta ** np.arange(t + 1)
        ok = np.isfinite(hist)
        out[t] = np.sum(hist[ok] * w[ok]) / np.sum(w[ok])
    return out


def warmup_mask(index: pd.Index, tau: float, dt: float, n_tau: float = 2.0) -> np.ndarray:
    """Rows within ``n_tau * tau`` seconds of the start of the series."""
    n = int(math.ceil(n_tau * tau / dt))
    mask = np.zeros(len(index), dtype=bool)
    mask[:n] = True
    return mask


@dataclass(frozen=True)
class Prediction:
    """Predicted over-temperature aligned with the input timestamps."""

    t_over_pred: pd.Series
    model: str
    variant: str
    warmup: np.ndarray | None = None


def dynamicize(coeffs, g: pd.Series, ws: pd.Series | None, params: EwmParams) -> Prediction:
    """Evaluate a static model on the EWM of irradiance and wind speed.

    Only the inputs are smoothed; ambient temperature and the model output
    are untouched.
    """
    alpha = params.alpha
    g_ewm = ewm_series(g, alpha)
    ws_ewm = None if ws is None else ewm_series(ws, alpha)
    pred = coeffs.predict(g_ewm, ws_ewm)
    if not isinstance(pred, pd.Series):
        pred = pd.Series(pred, index=getattr(g, "index", None))
    return Prediction(pred, coeffs.model, "ewm",
                      warmup_mask(pred.index, params.tau, params.dt))
