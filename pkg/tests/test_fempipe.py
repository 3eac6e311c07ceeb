import dataclasses

import numpy as np
import pytest

from conftest import synth_split, weather_frame
from pvfem import fempipe as fp
from pvfem import fitting as fit
from pvfem import models as m
from pvfem.timeseries import SplitSeries, WeatherSeries, from_frame, split_weekday_weekend

SHORT = dict(days=91, seed=3)


def shifted(split: SplitSeries, c: float) -> SplitSeries:
    def move(s: WeatherSeries) -> WeatherSeries:
        data = s.data.copy()
        data["t_module"] += c
        return dataclasses.replace(s, data=data)
    return SplitSeries(move(split.train), move(split.test))


@pytest.fixture(scope="module")
def wm1_short():
    return fp.run_fem("wm1", synth_split(**SHORT), options=fp.FemOptions(tau=360))


def test_train_mbe_zero(wm1_short):
    kp = fp.train_kpis(wm1_short)
    assert abs(kp["fem"].mbe) <= 1e-9
    assert wm1_short.correction == -wm1_short.mbe_train


def test_fem_is_shifted_ewm(wm1_short):
    p = wm1_short.test_predictions
    diff = (p["ewm"] - p["fem"]).dropna()
    assert len(diff) and np.allclose(diff, wm1_short.mbe_train, rtol=0, atol=1e-12)


def test_shared_timestamps(wm1_short):
    for v in fp.VARIANTS:
        assert wm1_short.test_predictions[v].index.equals(wm1_short.test.index)
        assert wm1_short.train_predictions[v].index.equals(wm1_short.train.index)


def test_override_recorded(wm1_short):
    assert wm1_short.tau_source == "override" and wm1_short.tau_selected == 360


def test_reports_ordered(wm1_short):
    cmp = fp.evaluate_variants(wm1_short)
    assert set(cmp.reports) == set(fp.VARIANTS)
    assert cmp.delta_rmse == cmp.reports["fem"].rmse - cmp.reports["static"].rmse
    assert cmp.reports["fem"].rmse < cmp.reports["static"].rmse


@pytest.mark.parametrize("model", ["ross", "wm2"])
def test_shift_invariance(model):
    split = synth_split(**SHORT, model=model)
    opts = fp.FemOptions(tau=360)
    base = fp.evaluate_variants(fp.run_fem(model, split, options=opts)).reports
    moved = fp.evaluate_variants(fp.run_fem(model, shifted(split, 2.0), options=opts)).reports
    assert moved["fem"].rmse == pytest.approx(base["fem"].rmse, rel=1e-9)
    assert moved["static"].rmse > base["static"].rmse


def test_bias_kill(wm1_year):
    split = synth_split(model="wm1", bias=1.5)
    run = fp.run_fem("wm1", split, options=fp.FemOptions(tau=360))
    reports = fp.evaluate_variants(run).reports
    assert abs(reports["fem"].mbe) < 0.1
    assert reports["ewm"].mbe < -1.0


def test_constant_weather():
    f = weather_frame(14 * 24 * 12, dt=300.0, ws=2.0, t_amb=20.0,
                      g=np.tile(np.linspace(0, 1000, 288), 14))
    weekend = f.index.dayofweek >= 5
    f.loc[weekend, "g_poa"] = 800.0
    f["t_module"] = 20.0 + m.Ross(0.03).predict(f["g_poa"])
    split = split_weekday_weekend(from_frame(f, 300.0))
    run = fp.run_fem("ross", split, options=fp.FemOptions(tau=600.0))
    p = {v: s.dropna().to_numpy() for v, s in run.test_predictions.items()}
    # the test weekends are constant, so the lag has nothing to smooth
    assert np.array_equal(p["static"], p["ewm"])
    assert np.allclose(p["fem"], p["ewm"] - run.mbe_train, rtol=0, atol=1e-12)


def test_night_mode_uses_night_rows():
    split = synth_split(**SHORT)
    day = fp.run_fem("ross", split, options=fp.FemOptions(tau=360))
    night = fp.run_fem("ross", split, options=fp.FemOptions(tau=360, mbe_mode="night"))
    # static models predict 0 K at night, so the night bias is minus the mean noise
    assert abs(night.mbe_train) < 0.05 and night.mbe_train != day.mbe_train


def test_estimated_tau_path():
    run = fp.run_fem("ross", synth_split(**SHORT))
    assert run.tau_source == "estimated" and run.tau_selected > 0
    assert run.tau_estimate is not None


def test_options_validation():
    with pytest.raises(ValueError):
        fp.FemOptions(tau=0)
    with pytest.raises(ValueError):
        fp.FemOptions(mbe_mode="weekly")


def test_unknown_model():
    with pytest.raises(ValueError):
        fp.run_fem("noct", synth_split(**SHORT))


def test_fit_dataset():
    split = synth_split(**SHORT)
    res = fp.fit_dataset(split.train)
    assert set(res.coefficients) | set(res.failures) == set(m.MODEL_NAMES)
    row = res.table_row()
    assert row["site"] == "synthetic" and row["r_eq_max"] > 0


def test_fit_dataset_collects_failures():
    f = weather_frame(14 * 24 * 12, dt=300.0, ws=0.0, t_amb=20.0,
                      g=np.tile(np.linspace(0, 1000, 288), 14))
    f["t_module"] = 20.0 + 0.03 * f["g_poa"]
    res = fp.fit_dataset(from_frame(f, 300.0), models=("ross", "wm1"))
    assert "wm1" in res.failures and "ross" in res.coefficients


def test_missing_train():
    split = synth_split(**SHORT)
    empty = dataclasses.replace(split.train, data=split.train.data.iloc[0:0])
    with pytest.raises(fit.FitError):
        fp.run_fem("ross", SplitSeries(empty, split.test))
