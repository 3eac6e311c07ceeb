import numpy as np
import pandas as pd
import pytest

from pvfem import synth
from pvfem.timeseries import WeatherSeries, from_frame, split_weekday_weekend


def weather_frame(n, dt=60.0, start="2021-01-04", g=500.0, t_amb=20.0, t_mod=35.0, ws=2.0):
    idx = pd.date_range(start, periods=n, freq=pd.Timedelta(seconds=dt))
    return pd.DataFrame({
        "g_poa": np.broadcast_to(g, n).astype(float),
        "t_ambient": np.broadcast_to(t_amb, n).astype(float),
        "t_module": np.broadcast_to(t_mod, n).astype(float),
        "ws": np.broadcast_to(ws, n).astype(float),
    }, index=idx)


def synth_series(spec: synth.SynthSpec) -> WeatherSeries:
    df = synth.generate(spec)
    df.index = pd.to_datetime(df.pop("timestamp"))
    return from_frame(df, spec.dt, spec.site_id)


_CACHE = {}


def synth_split(**kwargs):
    key = tuple(sorted(kwargs.items()))
    if key not in _CACHE:
        _CACHE[key] = split_weekday_weekend(synth_series(synth.SynthSpec(**kwargs)))
    return _CACHE[key]


@pytest.fixture(scope="session")
def wm1_year():
    """One synthetic year of WM1 data with the default lag and noise."""
    return synth_split(model="wm1")


_ACCEPTANCE: dict[str, list[tuple[bool, str]]] = {}


class AcceptanceLog:
    """Collects sub-check outcomes per acceptance criterion for the summary."""

    def check(self, criterion: str, ok: bool, detail: str) -> bool:
        _ACCEPTANCE.setdefault(criterion, []).append((bool(ok), detail))
        print(f"{'PASS' if ok else 'FAIL'} {criterion}: {detail}")
        return bool(ok)


@pytest.fixture(scope="session")
def acceptance():
    return AcceptanceLog()


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for name in sorted(_ACCEPTANCE, key=lambda n: int(n.split()[1])):
        checks = _ACCEPTANCE[name]
        ok = all(c for c, _ in checks)
        tr.write_line(f"{'PASS' if ok else 'FAIL'} {name}")
        for c, detail in checks:
            tr.write_line(f"    {'ok  ' if c else 'FAIL'} {detail}")
