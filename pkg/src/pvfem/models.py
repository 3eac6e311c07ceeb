"""
Static over-temperature models and translations between their parameters.

Every model returns the over-temperature ``T_o = T_m - T_a`` [K] from the
plane-of-array irradiance ``g`` [W/m^2] and, where relevant, the wind speed
``ws`` [m/s]. Add the ambient temperature to obtain the module temperature.
Missing wind speeds give missing outputs for the wind-aware models.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields
from typing import ClassVar, Union

import numpy as np

FAIMAN_U0_DEFAULT = 25.0
FAIMAN_U1_DEFAULT = 6.84
WS_CAP_DEFAULT = 8.0

MODEL_NAMES = ("ross", "sandia", "faiman", "wm1", "wm2")
WIND_MODELS = ("sandia", "faiman", "wm1", "wm2")


class _Coefficients:
    model: ClassVar[str]
    units: ClassVar[dict]

    def predict(self, g, ws=None):
        raise NotImplementedError

    @property
    def k_zero_wind(self) -> float:
        """Equivalent Ross coefficient, i.e. ``T_o / G`` at zero wind."""
        raise NotImplementedError

    def values(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self) if f.name != "provenance"}

    def to_dict(self) -> dict:
        return {
            "model": self.model,
            "values": self.values(),
            "units": dict(self.units),
            "provenance": dict(self.provenance),
        }


@dataclass(frozen=True)
class Ross(_Coefficients):
    k: float
    provenance: dict = field(default_factory=dict, compare=False)

    model: ClassVar[str] = "ross"
    units: ClassVar[dict] = {"k": "K/(W/m2)"}

    def __post_init__(self):
        if not self.k > 0:
            raise ValueError(f"Ross k must be > 0, got {self.k}")

    def predict(self, g, ws=None):
        return predict_ross(g, self)

    @property
    def k_zero_wind(self):
        return self.k


@dataclass(frozen=True)
class Sandia(_Coefficients):
    a: float
    b: float
    provenance: dict = field(default_factory=dict, compare=False)

    model: ClassVar[str] = "sandia"
    units: ClassVar[dict] = {"a": "-", "b": "s/m"}

    def predict(self, g, ws=None):
        return predict_sandia(g, ws, self)

    @property
    def k_zero_wind(self):
        return math.exp(self.a)


@dataclass(frozen=True)
class Faiman(_Coefficients):
    u0: float
    u1: float
    provenance: dict = field(default_factory=dict, compare=False)

    model: ClassVar[str] = "faiman"
    units: ClassVar[dict] = {"u0": "W/(m2 K)", "u1": "W s/(m3 K)"}

    def __post_init__(self):
        if not self.u0 > 0:
            raise ValueError(f"Faiman U0 must be > 0, got {self.u0}")
        if self.u1 < 0:
            raise ValueError(f"Faiman U1 must be >= 0, got {self.u1}")

    def predict(self, g, ws=None):
        return predict_faiman(g, ws, self)

    @property
    def k_zero_wind(self):
        return 1.0 / self.u0


@dataclass(frozen=True)
class WM1(_Coefficients):
    k: float
    d: float
    provenance: dict = field(default_factory=dict, compare=False)

    model: ClassVar[str] = "wm1"
    units: ClassVar[dict] = {"k": "K/(W/m2)", "d": "m/s"}

    def __post_init__(self):
        if not self.k > 0:
            raise ValueError(f"WM1 k must be > 0, got {self.k}")
        if not self.d > 0:
            raise ValueError(f"WM1 d must be > 0, got {self.d}")

    def predict(self, g, ws=None):
        return predict_wm1(g, ws, self)

    @property
    def k_zero_wind(self):
        return self.k


@dataclass(frozen=True)
class WM2(_Coefficients):
    k: float
    k_w: float
    ws_cap: float = WS_CAP_DEFAULT
    provenance: dict = field(default_factory=dict, compare=False)

    model: ClassVar[str] = "wm2"
    units: ClassVar[dict] = {"k": "K/(W/m2)", "k_w": "K s/(W m)", "ws_cap": "m/s"}

    def __post_init__(self):
        if not self.k > 0:
            raise ValueError(f"WM2 k must be > 0, got {self.k}")
        if not self.ws_cap > 0:
            raise ValueError(f"WM2 ws_cap must be > 0, got {self.ws_cap}")

    @property
    def non_negative(self) -> bool:
        """True if predictions stay >= 0 for every wind speed."""
        return self.k - self.k_w * self.ws_cap >= 0

    def predict(self, g, ws=None):
        return predict_wm2(g, ws, self)

    @property
    def k_zero_wind(self):
        return self.k


ModelCoefficients = Union[Ross, Sandia, Faiman, WM1, WM2]
_BY_NAME = {cls.model: cls for cls in (Ross, Sandia, Faiman, WM1, WM2)}


def _evaluate(g, ws, fn, needs_wind=True):
    """Apply ``fn(g, ws)`` on floats/arrays, returning the input's shape.

    Scalars give a float; a pandas Series for ``g`` gives a Series on the
    same index.
    """
    if needs_wind and ws is None:
        raise ValueError("this model needs a wind speed input")
    g_arr = np.asarray(g, dtype=float)
    ws_arr = None if ws is None else np.asarray(ws, dtype=float)
    out = fn(g_arr, ws_arr)
    if hasattr(g, "index"):
        return g.__class__(out, index=g.index)
    if np.ndim(out) == 0:
        return float(out)
    return out


def predict_ross(g, coeffs: Ross):
    return _evaluate(g, None, lambda g_, _: coeffs.k * g_, needs_wind=False)


def predict_sandia(g, ws, coeffs: Sandia):
    return _evaluate(g, ws, lambda g_, w: g_ * np.exp(coeffs.a + coeffs.b * w))


def predict_faiman(g, ws, coeffs: Faiman):
    def fn(g_, w):
        denom = coeffs.u0 + coeffs.u1 * w
        if np.any(denom <= 0):
            raise ValueError("Faiman denominator U0 + U1*WS is not positive")
        return g_ / denom
    return _evaluate(g, ws, fn)


def predict_wm1(g, ws, coeffs: WM1):
    return _evaluate(g, ws, lambda g_, w: coeffs.k * g_ * np.exp(-w / coeffs.d))


def predict_wm2(g, ws, coeffs: WM2):
    # np.minimum keeps NaN, so missing wind stays missing.
    return _evaluate(g, ws, lambda g_, w: g_ * (coeffs.k - coeffs.k_w * np.minimum(w, coeffs.ws_cap)))


def predict(coeffs: ModelCoefficients, g, ws=None):
    return coeffs.predict(g, ws)


def sandia_to_wm1(a: float, b: float) -> tuple[float, float]:
    """``(k, d)`` of the WM1 model identical to Sandia ``(a, b)``."""
    if b >= 0:
        raise ValueError("Sandia b must be negative for a WM1 translation (no wind cooling)")
    return math.exp(a), -1.0 / b


def wm1_to_sandia(k: float, d: float) -> tuple[float, float]:
    if k <= 0 or d <= 0:
        raise ValueError("WM1 k and d must be positive")
    return math.log(k), -1.0 / d


def coefficients_from_dict(d: dict) -> ModelCoefficients:
    try:
        cls = _BY_NAME[d["model"]]
    except KeyError:
        raise ValueError(f"unknown model tag in {d!r}") from None
    return cls(**d["values"], provenance=dict(d.get("provenance", {})))


def model_class(name: str):
    try:
        return _BY_NAME[name.lower()]
    except KeyError:
        raise ValueError(f"unknown model {name!r}; choose from {', '.join(MODEL_NAMES)}") from None
