import math

import numpy as np
import pandas as pd
import pytest
from hypothesis import given, settings, strategies as st

from pvfem import models as m
from pvfem.ewm import (EwmParams, alpha_from, dynamicize, ewm_series, ewm_weighted_sum,
                       span_from, warmup_mask)


def test_alpha_limits():
    assert alpha_from(300, 3600) > 0.99999
    assert alpha_from(300, 300) == pytest.approx(1 - math.exp(-1), rel=1e-12)


def test_span_ten_minutes():
    span = EwmParams(300, 60).span
    assert span * 60 == pytest.approx(600, rel=0.05)


def test_span_small_step():
    assert span_from(alpha_from(100.0, 1.0)) == pytest.approx(200.0, rel=0.01)


@pytest.mark.parametrize("bad", [0.0, -0.1, 1.5])
def test_bad_alpha(bad):
    with pytest.raises(ValueError):
        ewm_series([1.0], bad)


def test_constant_fixed_point():
    x = np.full(50, 7.25)
    assert np.array_equal(ewm_series(x, 0.1), x)


def test_alpha_one_is_identity():
    x = np.random.default_rng(0).normal(size=100)
    assert np.array_equal(ewm_series(x, 1.0), x)


def test_step_matches_weighted_sum():
    x = np.r_[np.zeros(5), np.full(5, 1000.0)]
    a = 1 - math.exp(-1)
    assert np.allclose(ewm_series(x, a), ewm_weighted_sum(x, a), rtol=1e-9, atol=0)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(-100, 1000), min_size=1, max_size=80), st.floats(0.01, 1.0))
def test_recursive_equals_weighted_sum(x, a):
    x = np.array(x)
    assert np.allclose(ewm_series(x, a), ewm_weighted_sum(x, a), rtol=1e-9, atol=1e-9)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(-100, 1000), min_size=1, max_size=80), st.floats(0.01, 1.0))
def test_convex_combination(x, a):
    x = np.array(x)
    y = ewm_series(x, a)
    lo = np.minimum.accumulate(x)
    hi = np.maximum.accumulate(x)
    assert np.all(y >= lo - 1e-9) and np.all(y <= hi + 1e-9)


def test_gaps_give_missing_output_and_decay():
    x = np.array([10.0, np.nan, np.nan, 20.0])
    a = 0.5
    y = ewm_series(x, a)
    assert math.isnan(y[1]) and math.isnan(y[2])
    assert y[3] == pytest.approx((20 + 0.125 * 10) / (1 + 0.125))
    assert np.allclose(y, ewm_weighted_sum(x, a), equal_nan=True)


def test_series_preserved():
    s = pd.Series([1.0, 2.0], index=pd.date_range("2021", periods=2, freq="min"), name="g")
    out = ewm_series(s, 0.5)
    assert isinstance(out, pd.Series) and out.index.equals(s.index) and out.name == "g"


def test_warmup_mask():
    idx = pd.date_range("2021", periods=30, freq="min")
    mask = warmup_mask(idx, tau=300, dt=60)
    assert mask.sum() == 10 and mask[:10].all()


def test_dynamicize_constant_weather():
    idx = pd.date_range("2021", periods=50, freq="min")
    g = pd.Series(800.0, index=idx)
    ws = pd.Series(3.0, index=idx)
    c = m.WM1(0.03, 8)
    out = dynamicize(c, g, ws, EwmParams(300, 60)).t_over_pred
    assert np.allclose(out, c.predict(g, ws), rtol=1e-12)


def test_dynamicize_alpha_one():
    rng = np.random.default_rng(1)
    g = pd.Series(rng.uniform(0, 1000, 40))
    ws = pd.Series(rng.uniform(0, 8, 40))
    c = m.Faiman(25, 6.84)
    # dt >> tau gives alpha = 1 to double precision
    out = dynamicize(c, g, ws, EwmParams(1.0, 3600.0)).t_over_pred
    assert np.allclose(out, c.predict(g, ws), rtol=1e-12)


def test_step_response_at_tau():
    dt, tau = 1.0, 100.0
    n_hist = 3000  # zero history long enough for the weight sum to converge
    g = np.r_[np.zeros(n_hist), np.full(200, 1000.0)]
    ws = np.full(g.size, 2.0)
    c = m.WM1(0.0348, 5)
    pred = np.asarray(dynamicize(c, pd.Series(g), pd.Series(ws), EwmParams(tau, dt)).t_over_pred)
    # step between the last zero sample and the next one; evaluate tau later
    at_tau = pred[n_hist - 1 + int(tau / dt)]
    assert at_tau == pytest.approx(c.predict(1000.0, 2.0) * (1 - math.exp(-1)), abs=1e-6)


@given(st.floats(1, 1000))
def test_dynamicize_homogeneous(scale):
    rng = np.random.default_rng(2)
    g = pd.Series(rng.uniform(0, 1000, 30))
    ws = pd.Series(rng.uniform(0, 8, 30))
    c = m.Sandia(-3.4, -0.08)
    p = EwmParams(300, 60)
    a = dynamicize(c, g * scale, ws, p).t_over_pred
    b = dynamicize(c, g, ws, p).t_over_pred * scale
    assert np.allclose(a, b, rtol=1e-12)
