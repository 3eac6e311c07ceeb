"""Acceptance suite: one test group per criterion, each sub-check logged as PASS/FAIL."""

import json
import math
import os
from pathlib import Path

import numpy as np
import pandas as pd
import pytest
import yaml

from pvfem import cli, metrics
from pvfem import models as m
from pvfem.ewm import EwmParams, alpha_from, ewm_series, ewm_weighted_sum, span_from
from pvfem.synth import DEFAULT_TRUTH

C1, C2, C3, C4, C5 = (f"criterion {i}" for i in range(1, 6))
C6, C7, C8, C9 = (f"criterion {i}" for i in range(6, 10))

TRUE_TAU = 360.0

# name: (r_eq mK/(W/m^2), c_eq kJ/(K m^2)) as printed in the layer table
LAYERS = {
    "air_film_front": (65.22, 0.0), "al_frame_front": (0.01, 4.9), "glass": (1.78, 4.8),
    "eva_front": (1.43, 1.0), "pv_cells_front": (0.00, 0.2), "tedlar": (1.50, 0.5),
}
# name: (r_eq, c_eq, tau s)
TOTALS = {
    "total_front": (3.22, 10.8, 34.8), "total_back": (2.94, 6.5, 19.0),
    "total_front_air": (68.43, 10.8, 740.6), "total_back_air": (68.16, 6.5, 441.2),
    "total": (1.54, 17.3, 26.5), "total_air": (34.15, 17.3, 590.6),
}


def read_bytes(d: Path) -> dict:
    return {p.name: p.read_bytes() for p in sorted(d.iterdir())}


def within(got, want, tol):
    return abs(got - want) <= tol


def rel_within(got, want, rel):
    return abs(got - want) <= rel * abs(want)


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    return tmp_path_factory.mktemp("acceptance")


@pytest.fixture(scope="module")
def synthetic(workdir):
    """One synthetic year per model at 60 s, lag 360 s, noise 0.5 K, via the CLI."""
    cfg = workdir / "synth.yaml"
    cfg.write_text(yaml.safe_dump({"synth": {"tau": TRUE_TAU, "noise_sigma": 0.5, "dt": 60,
                                             "days": 365, "seed": 0, "site_id": "acc"}}))
    out = workdir / "synth"
    assert cli.main(["synth", "--config", str(cfg), "--models", ",".join(m.MODEL_NAMES),
                     "--out", str(out)]) == 0
    return {name: out / f"acc_{name}_run.yaml" for name in m.MODEL_NAMES}


@pytest.fixture(scope="module")
def fitted(synthetic, workdir):
    out = {}
    for name, cfg in synthetic.items():
        d = workdir / f"fit_{name}"
        code = cli.main(["fit", "--config", str(cfg), "--models", name, "--out", str(d)])
        assert code in (0, 1)
        out[name] = json.loads((d / "coefficients.json").read_text())
    return out


@pytest.fixture(scope="module")
def runs(synthetic, workdir):
    out = {}
    for name, cfg in synthetic.items():
        d = workdir / f"run_{name}"
        assert cli.main(["run", "--config", str(cfg), "--models", name, "--out", str(d)]) in (0, 1)
        out[name] = d
    return out


# --- 1 -------------------------------------------------------------------------

def test_c1_layer_table(tmp_path, acceptance):
    assert cli.main(["rc", "--out", str(tmp_path / "full")]) == 0
    assert cli.main(["rc", "--remove-layer", "al_frame", "--out", str(tmp_path / "noframe")]) == 0
    layers = pd.read_csv(tmp_path / "full" / "rc_layers.csv").set_index("name")
    totals = pd.read_csv(tmp_path / "full" / "rc_totals.csv").set_index("name")
    ok = True
    for name, (r, c) in LAYERS.items():
        row = layers.loc[name]
        ok &= acceptance.check(C1, within(row.r_eq_mK, r, 0.05) and within(row.c_eq_kJ, c, 0.1),
                               f"{name} r={row.r_eq_mK:.3f} c={row.c_eq_kJ:.3f} vs {r}/{c}")
    for name, (r, c, tau) in TOTALS.items():
        row = totals.loc[name]
        good = within(row.r_eq_mK, r, 0.05) and within(row.c_eq_kJ, c, 0.1) and within(row.tau_s, tau, 1)
        ok &= acceptance.check(C1, good, f"{name} r={row.r_eq_mK:.3f} c={row.c_eq_kJ:.3f} "
                                         f"tau={row.tau_s:.1f} vs {r}/{c}/{tau}")
    tau_nf = json.loads((tmp_path / "noframe" / "rc_manifest.json").read_text())["tau0_s"]
    ok &= acceptance.check(C1, within(tau_nf, 259, 2), f"frame removed tau0={tau_nf:.1f} vs 259 +-2")
    assert ok


# --- 2 -------------------------------------------------------------------------

def test_c2_model_identities(acceptance):
    rng = np.random.default_rng(0)
    n = 100_000
    g = rng.uniform(0, 1200, n)
    ws = rng.uniform(0, 15, n)
    a = rng.uniform(-4.5, -2.5, n)
    b = rng.uniform(-0.3, -0.01, n)
    wm1 = g * np.exp(a) * np.exp(-ws / (-1.0 / b))
    sandia = m.Sandia(0.0, 0.0).predict(g, 0.0) * np.exp(a + b * ws)
    err = np.max(np.abs(wm1 - sandia) / np.maximum(np.abs(sandia), 1e-300))
    # scalar path through the model classes on a subsample
    cls_err = max(abs(m.WM1(*m.sandia_to_wm1(ai, bi)).predict(gi, wi) - m.Sandia(ai, bi).predict(gi, wi))
                  / max(m.Sandia(ai, bi).predict(gi, wi), 1e-300)
                  for ai, bi, gi, wi in zip(a[:2000], b[:2000], g[:2000], ws[:2000]))
    ok1 = acceptance.check(C2, err <= 1e-12 and cls_err <= 1e-12,
                           f"WM1 vs Sandia max rel diff {max(err, cls_err):.2e} on 1e5 points")

    k = 0.0348
    ross = m.Ross(k).predict(g)
    worst = 0.0
    for c in (m.Sandia(math.log(k), -0.1), m.Faiman(1 / k, 5.0), m.WM1(k, 10.0), m.WM2(k, 0.0025)):
        d = np.max(np.abs(c.predict(g, np.zeros(n)) - ross) / np.maximum(ross, 1e-300))
        worst = max(worst, d)
    ok2 = acceptance.check(C2, worst <= 1e-12, f"wind models at WS=0 vs Ross max rel diff {worst:.2e}")
    assert ok1 and ok2


# --- 3 -------------------------------------------------------------------------

@pytest.mark.parametrize("alpha", [0.01, 0.1, 0.6321, 1.0])
def test_c3_ewm_oracle(alpha, acceptance):
    x = np.random.default_rng(1).uniform(0, 1000, 10_000)
    diff = np.max(np.abs(ewm_series(x, alpha) - ewm_weighted_sum(x, alpha)))
    assert acceptance.check(C3, diff <= 1e-9, f"alpha={alpha}: recursive vs weighted sum {diff:.2e}")


def test_c3_fixed_point_and_span(acceptance):
    x = np.full(10_000, 731.25)
    exact = all(np.array_equal(ewm_series(x, a), x) for a in (0.01, 0.1, 0.6321, 1.0))
    ok1 = acceptance.check(C3, exact, "constant series is an exact fixed point")
    p = EwmParams(100.0, 1.0)
    span = span_from(alpha_from(p.tau, p.dt))
    ok2 = acceptance.check(C3, rel_within(span, 2 * p.tau / p.dt, 0.01),
                           f"span {span:.2f} vs 2 tau/dt = {2 * p.tau / p.dt:.0f}")
    assert ok1 and ok2


# --- 4 -------------------------------------------------------------------------

def _truth_kd(name):
    t = DEFAULT_TRUTH[name]
    if name == "sandia":
        return m.sandia_to_wm1(t["a"], t["b"])
    return t.get("k"), t.get("d")


@pytest.mark.parametrize("name", m.MODEL_NAMES)
def test_c4_coefficient_recovery(name, fitted, acceptance):
    got = fitted[name]["coefficients"][name]["values"]
    truth = DEFAULT_TRUTH[name]
    checks = []
    if name == "faiman":
        checks += [("u0", got["u0"], truth["u0"], 0.10), ("u1", got["u1"], truth["u1"], 0.10)]
    else:
        k_true, d_true = _truth_kd(name)
        if name == "sandia":
            k, d = m.sandia_to_wm1(got["a"], got["b"])
        else:
            k, d = got["k"], got.get("d")
        checks.append(("k", k, k_true, 0.05))
        if d_true is not None:
            checks.append(("d", d, d_true, 0.10))
        if name == "wm2":
            checks.append(("k_w", got["k_w"], truth["k_w"], 0.10))
    ok = True
    for label, value, want, rel in checks:
        ok &= acceptance.check(C4, rel_within(value, want, rel),
                               f"{name} {label}={value:.5g} vs {want:.5g} (+-{rel:.0%})")
    assert ok


@pytest.mark.parametrize("name", m.MODEL_NAMES)
def test_c4_tau_recovery(name, fitted, acceptance):
    tau = fitted[name]["tau"]
    value = float("nan") if tau is None else tau["tau_selected_s"]
    assert acceptance.check(C4, within(value, TRUE_TAU, 60),
                            f"{name} tau_selected={value:.0f} s vs {TRUE_TAU:.0f} +-60 s")


# --- 5 -------------------------------------------------------------------------

def test_c5_bias_kill(synthetic, workdir, acceptance):
    cfg = workdir / "synth_bias.yaml"
    cfg.write_text(yaml.safe_dump({"synth": {"tau": TRUE_TAU, "noise_sigma": 0.5, "dt": 60,
                                             "days": 365, "seed": 0, "bias": 1.5,
                                             "site_id": "biased"}}))
    data = workdir / "synth_bias"
    assert cli.main(["synth", "--config", str(cfg), "--models", "wm1", "--out", str(data)]) == 0
    kp = {}
    for label, run_cfg in (("clean", synthetic["wm1"]), ("biased", data / "biased_wm1_run.yaml")):
        out = workdir / f"bias_{label}"
        assert cli.main(["run", "--config", str(run_cfg), "--out", str(out)]) in (0, 1)
        kp[label] = pd.read_csv(out / "kpis.csv").set_index("variant")
        train = json.loads((out / "coefficients.json").read_text())["wm1"]["train_kpis"]
        ok_train = acceptance.check(C5, abs(train["fem"]["mbe"]) <= 1e-9,
                                    f"{label}: FEM train MBE {train['fem']['mbe']:.1e} K")
    fem = kp["biased"].loc["fem", "mbe"]
    ewm = kp["biased"].loc["ewm", "mbe"]
    shift = ewm - kp["clean"].loc["ewm", "mbe"]
    ok1 = acceptance.check(C5, abs(fem) <= 0.05, f"FEM test MBE {fem:+.3f} K (+-0.05)")
    # the criterion gives no tolerance for the EWM figure; 0.25 K is used
    ok2 = acceptance.check(C5, within(ewm, -1.5, 0.25),
                           f"EWM test MBE {ewm:+.3f} K vs -1.5 +-0.25 (shift from clean {shift:+.3f} K)")
    assert ok1 and ok2 and ok_train


# --- 6 -------------------------------------------------------------------------

@pytest.mark.parametrize("name", ["sandia", "faiman", "wm1", "wm2"])
def test_c6_fem_improves(name, runs, acceptance):
    kp = pd.read_csv(runs[name] / "kpis.csv").set_index("variant")
    static, fem = kp.loc["static", "rmse"], kp.loc["fem", "rmse"]
    assert acceptance.check(C6, fem < static, f"{name} RMSE static {static:.3f} -> FEM {fem:.3f} K")


# --- 7 -------------------------------------------------------------------------

def test_c7_measured_dataset(tmp_path, acceptance):
    path = os.environ.get("PVFEM_REFERENCE_CSV")
    if not path:
        acceptance.check(C7, True, "skipped: PVFEM_REFERENCE_CSV not set")
        pytest.skip("measured reference dataset not supplied")
    cfg = tmp_path / "ref.yaml"
    cfg.write_text(yaml.safe_dump({"dataset": {"path": str(Path(path).resolve()), "dt": 60,
                                               "site_id": "reference"}}))
    cli.main(["fit", "--config", str(cfg), "--out", str(tmp_path / "fit")])
    row = pd.read_csv(tmp_path / "fit" / "rc_row.csv").iloc[0]
    ok = True
    for col, want in (("r_eq_max", 31.2), ("r_m", 14.0), ("tau0", 510), ("tau", 334)):
        value = row.get(col, float("nan"))
        ok &= acceptance.check(C7, rel_within(value, want, 0.10), f"{col}={value:.4g} vs {want} (+-10%)")
    assert ok


# --- 8 -------------------------------------------------------------------------

def test_c8_metric_relations(runs, acceptance):
    kp = pd.concat([pd.read_csv(d / "kpis.csv") for d in runs.values()])
    delayed = pd.concat([pd.read_csv(d / "delayed_sensor.csv") for d in runs.values()])
    allk = pd.concat([kp, delayed])
    order = ((allk.rmse + 1e-9 >= allk.mae) & (allk.mae + 1e-9 >= allk.mbe.abs())).all()
    ok1 = acceptance.check(C8, order, f"RMSE >= MAE >= |MBE| on {len(allk)} reports")
    en = pd.concat([pd.read_csv(d / "energy.csv") for d in runs.values()])
    rel = ((en.e_total - (en.e_over - en.e_under)).abs() / en.e_total).max()
    ok2 = acceptance.check(C8, rel <= 1e-9, f"energy identity max rel diff {rel:.1e} on {len(en)} reports")
    r = metrics.energy_error(np.full(60, 11.0), np.full(60, 10.0), np.full(60, 1000.0), -0.35, 60.0)
    ok3 = acceptance.check(C8, r.e_total == pytest.approx(0.0035, rel=1e-12),
                           f"+1 K for 1 h at 1000 W/m2, gamma -0.35: {r.e_total:.6g} kWh/kWp")
    assert ok1 and ok2 and ok3


# --- 9 -------------------------------------------------------------------------

def test_c9_determinism(workdir, acceptance):
    cfg = workdir / "det.yaml"
    cfg.write_text(yaml.safe_dump({"synth": {"days": 60, "seed": 7, "site_id": "det"}}))
    ok = True
    for i in (1, 2):
        assert cli.main(["synth", "--config", str(cfg), "--models", "wm2", "--seed", "7",
                         "--out", str(workdir / f"det_synth{i}")]) == 0
    ok &= acceptance.check(C9, read_bytes(workdir / "det_synth1") == read_bytes(workdir / "det_synth2"),
                           "synth outputs byte-identical")
    run_cfg = workdir / "det_synth1" / "det_wm2_run.yaml"
    for cmd in ("rc", "fit", "run"):
        dirs = [workdir / f"det_{cmd}{i}" for i in (1, 2)]
        for d in dirs:
            argv = [cmd, "--out", str(d)]
            if cmd != "rc":
                argv += ["--config", str(run_cfg), "--emit-plot-data"] if cmd == "run" else ["--config", str(run_cfg)]
            assert cli.main(argv) in (0, 1)
        ok &= acceptance.check(C9, read_bytes(dirs[0]) == read_bytes(dirs[1]),
                               f"{cmd} outputs byte-identical ({len(read_bytes(dirs[0]))} files)")
    assert ok
