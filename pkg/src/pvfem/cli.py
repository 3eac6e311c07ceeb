"""
Command-line entry point: ``pvfem {rc,fit,run,synth}``.

Exit codes: 0 success, 1 finished with warnings or failed model fits,
2 input or configuration error.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np
import pandas as pd
import yaml

from . import __version__
from . import fempipe as fp
from . import fitting as fit
from . import metrics as mt
from . import rcnet
from . import synth
from .config import (ConfigError, RunConfig, apply_env, build_config, canonical_hash,
                     file_digest, parse_models, read_yaml)
from .timeseries import DataError, load_csv, over_temperature, split_weekday_weekend

logger = logging.getLogger("pvfem")

EXIT_OK, EXIT_DEGRADED, EXIT_INPUT = 0, 1, 2
FLOAT_FORMAT = "%.10g"


# --- output helpers --------------------------------------------------------------

def _plain(obj):
    """JSON-safe copy: numpy scalars to Python, non-finite floats to strings."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, Path):
        return str(obj)
    if isinstance(obj, np.generic):
        obj = obj.item()
    if isinstance(obj, float) and not math.isfinite(obj):
        return "nan" if math.isnan(obj) else ("inf" if obj > 0 else "-inf")
    return obj


def write_json(path: Path, obj) -> None:
    with open(path, "w") as fh:
        json.dump(_plain(obj), fh, indent=2, sort_keys=True, allow_nan=False)
        fh.write("\n")


def write_csv(path: Path, frame: pd.DataFrame, index: bool = False) -> None:
    frame.to_csv(path, index=index, float_format=FLOAT_FORMAT, lineterminator="\n")


def write_text(path: Path, lines) -> None:
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def _manifest(command: str, cfg_hash: str, outputs, **extra) -> dict:
    out = {"command": command, "version": __version__, "config_hash": cfg_hash,
           "outputs": sorted(outputs)}
    out.update(extra)
    return out


# --- config resolution -------------------------------------------------------

def _run_config(args) -> RunConfig:
    if not args.config:
        raise ConfigError("--config is required")
    path = Path(args.config)
    raw = apply_env(read_yaml(path))
    if args.models:
        raw["models"] = list(parse_models(args.models))
    if args.tau is not None:
        raw["tau"] = args.tau
    if args.emit_plot_data:
        raw["emit_plot_data"] = True
    if args.out:
        raw["output"] = args.out
    cfg = build_config(raw, path.parent)
    if cfg.dataset is None:
        raise ConfigError(f"{path}: no 'dataset' section")
    if not cfg.dataset.path.exists():
        raise ConfigError(f"dataset file not found: {cfg.dataset.path}")
    return cfg


def _load_split(cfg: RunConfig):
    ds = cfg.dataset
    series = load_csv(ds.path, ds.schema, ds.dt, ds.site_id)
    return series, split_weekday_weekend(series)


# --- rc ---------------------------------------------------------------------------

def rc_tables(summary: rcnet.RcSummary) -> tuple[pd.DataFrame, pd.DataFrame]:
    def frame(rows):
        return pd.DataFrame([{
            "name": r.name, "r_eq_mK": r.r_eq * 1e3, "c_eq_kJ": r.c_eq / 1e3,
            "tau_s": r.tau, "mass_kg": r.mass} for r in rows])
    return frame(summary.layers), frame(summary.totals.values())


def cmd_rc(args) -> int:
    path = Path(args.config) if args.config else rcnet.bundled_stack_path()
    stack = rcnet.load_stack(path)
    if args.remove_layer:
        stack = stack.without(args.remove_layer)
    summary = rcnet.stack_summary(stack)
    out = Path(args.out or "out_rc")
    out.mkdir(parents=True, exist_ok=True)
    layers, totals = rc_tables(summary)
    write_csv(out / "rc_layers.csv", layers)
    write_csv(out / "rc_totals.csv", totals)
    cfg_hash = canonical_hash({"stack": read_yaml(path), "remove_layer": args.remove_layer})
    write_json(out / "rc_manifest.json", _manifest(
        "rc", cfg_hash, ["rc_layers.csv", "rc_totals.csv"],
        stack_file=path.name, tau0_s=summary.tau0, r_total_mK=summary.r_total * 1e3))
    lines = [f"layer stack {path.name}" + (f" without '{args.remove_layer}*'" if args.remove_layer else ""),
             totals.to_string(index=False, float_format=lambda v: f"{v:.4g}")]
    write_text(out / "rc_summary.txt", lines)
    print("\n".join(lines))
    return EXIT_OK


# --- fit -------------------------------------------------------------------------

def fit_outputs(result: fp.DatasetFit) -> dict:
    coeffs = {name: c.to_dict() for name, c in result.coefficients.items()}
    est = result.tau_estimate
    tau = None
    if est is not None:
        tau = {"tau0_s": est.tau0, "f_s_per_m": est.f, "tau_selected_s": est.tau_selected,
               "horizon_s": est.horizon, "sigma_ws": est.sigma_ws, "warnings": est.warnings}
    return {
        "site_id": result.site_id,
        "coefficients": coeffs,
        "failures": result.failures,
        "r_eq_max": dataclasses.asdict(result.r_eq_max),
        "r_m": None if result.r_m is None else dataclasses.asdict(result.r_m),
        "tau": tau,
        "table_row": result.table_row(),
        "warnings": result.warnings,
    }


def cmd_fit(args) -> int:
    cfg = _run_config(args)
    series, split = _load_split(cfg)
    result = fp.fit_dataset(split.train, cfg.models, cfg.settings)
    out = cfg.output
    out.mkdir(parents=True, exist_ok=True)
    files = ["coefficients.json", "rc_row.csv"]
    write_json(out / "coefficients.json", fit_outputs(result))
    write_csv(out / "rc_row.csv", pd.DataFrame([result.table_row()]))
    if result.tau_estimate is not None:
        write_csv(out / "tau_bins.csv", result.tau_estimate.to_frame())
        files.append("tau_bins.csv")
    cfg_hash = cfg.config_hash()
    write_json(out / "fit_manifest.json", _manifest(
        "fit", cfg_hash, files, config=cfg.canonical(), input_sha256=file_digest(cfg.dataset.path),
        dropped_rows=series.dropped_count, warnings=result.warnings, failures=result.failures))

    lines = [f"site {result.site_id}  config {cfg_hash}"]
    for name, c in result.coefficients.items():
        vals = ", ".join(f"{k}={v:.5g}" for k, v in c.values().items())
        lines.append(f"  {name:7s} {vals}")
    for name, msg in result.failures.items():
        lines.append(f"  {name:7s} FAILED: {msg}")
    lines.append("  " + ", ".join(f"{k}={v:.4g}" for k, v in result.table_row().items()
                                  if isinstance(v, float)))
    lines.extend(f"  warning: {w}" for w in result.warnings)
    write_text(out / "fit_summary.txt", lines)
    print("\n".join(lines))
    return EXIT_DEGRADED if result.warnings or result.failures else EXIT_OK


# --- run ---------------------------------------------------------------------------

def wide_table(kpi_rows: pd.DataFrame, metric: str) -> pd.DataFrame:
    """Site rows, one ``<model>_<variant>`` column per model and variant."""
    t = kpi_rows.pivot_table(index="dataset", columns=["model", "variant"], values=metric,
                             aggfunc="first", sort=False)
    t.columns = [f"{m}_{v}" for m, v in t.columns]
    return t.rename_axis("site")


def plot_frame(run: fp.FemRun) -> pd.DataFrame:
    t = run.test
    frame = pd.DataFrame({
        "timestamp": t.index.strftime("%Y-%m-%dT%H:%M:%S"),
        "g_poa": t.g_poa.to_numpy(), "ws": t.ws.to_numpy(),
        "t_over_measured": t.t_over.to_numpy(),
    })
    for v in fp.VARIANTS:
        frame[f"t_over_{v}"] = run.test_predictions[v].to_numpy()
    return frame.dropna(subset=["t_over_measured"])


def cmd_run(args) -> int:
    cfg = _run_config(args)
    series, split = _load_split(cfg)
    options = fp.FemOptions(tau=cfg.tau, daytime_g=cfg.daytime_g, mbe_mode=cfg.mbe_mode)
    out = cfg.output
    out.mkdir(parents=True, exist_ok=True)
    site = cfg.dataset.site_id

    kpi_rows, delta_rows, energy_rows, coeffs = [], [], [], {}
    failures, warnings, files = {}, [], []
    test = over_temperature(split.test)
    full_year = (series.index[-1] - series.index[0]).days >= 364
    day = mt.daytime_mask(test.g_poa, cfg.daytime_g)
    for model in cfg.models:
        try:
            run = fp.run_fem(model, split, cfg.settings, options)
        except fit.FitError as exc:
            failures[model] = str(exc)
            logger.error("%s: %s", model, exc)
            continue
        warnings.extend(run.warnings)
        cmp = fp.evaluate_variants(run, daytime_g=cfg.daytime_g, dataset=site)
        kpi_rows.extend(cmp.rows())
        delta_rows.append({"dataset": site, "model": model, "delta_rmse": cmp.delta_rmse,
                           "delta_rmse_pct": cmp.delta_rmse_pct, "delta_mae": cmp.delta_mae,
                           "delta_abs_mbe": cmp.delta_abs_mbe})
        for v in fp.VARIANTS:
            rep = mt.energy_error(run.test_predictions[v], test.t_over, test.g_poa,
                                  cfg.gamma, test.dt, cfg.h_y, full_year, day)
            energy_rows.append({"dataset": site, "model": model, "variant": v, **rep.to_dict()})
        coeffs[model] = {**run.coefficients.to_dict(), "tau_s": run.tau_selected,
                         "tau_source": run.tau_source, "alpha": run.alpha,
                         "mbe_train": run.mbe_train, "correction": run.correction,
                         "train_kpis": {k: r.to_dict() for k, r in fp.train_kpis(run, cfg.daytime_g).items()}}
        if cfg.emit_plot_data:
            name = f"plot_data_{model}.csv"
            write_csv(out / name, plot_frame(run))
            files.append(name)

    if kpi_rows:
        kpi = pd.DataFrame(kpi_rows)
        write_csv(out / "kpis.csv", kpi)
        for metric in ("rmse", "mae", "mbe"):
            write_csv(out / f"{metric}_table.csv", wide_table(kpi, metric), index=True)
        write_csv(out / "deltas.csv", pd.DataFrame(delta_rows))
        write_csv(out / "energy.csv", pd.DataFrame(energy_rows))
        files += ["kpis.csv", "rmse_table.csv", "mae_table.csv", "mbe_table.csv",
                  "deltas.csv", "energy.csv"]
    delays = [d for d in cfg.delays if (d / test.dt) % 1 == 0]
    if len(delays) < len(cfg.delays):
        skipped = sorted(set(cfg.delays) - set(delays))
        warnings.append(f"delayed sensor baseline: skipped delays {skipped} s, "
                        f"not multiples of dt={test.dt:g} s")
    if delays:
        try:
            base = mt.delayed_sensor_baseline(test.t_over, delays, test.dt, test.g_poa,
                                              cfg.daytime_g, site)
            write_csv(out / "delayed_sensor.csv", pd.DataFrame([r.to_dict() for r in base]))
            files.append("delayed_sensor.csv")
        except ValueError as exc:
            warnings.append(f"delayed sensor baseline: {exc}")
    write_json(out / "coefficients.json", coeffs)
    files.append("coefficients.json")
    cfg_hash = cfg.config_hash()
    write_json(out / "run_manifest.json", _manifest(
        "run", cfg_hash, files, config=cfg.canonical(), input_sha256=file_digest(cfg.dataset.path),
        dropped_rows=series.dropped_count, mbe_convention="MBE = mean(predicted - measured); "
        "FEM = EWM - MBE_train", failures=failures, warnings=warnings))

    lines = [f"site {site}  config {cfg_hash}  (daytime test rows, G > {cfg.daytime_g:g} W/m2)",
             f"{'model':7s} {'variant':7s} {'RMSE':>7s} {'MAE':>7s} {'MBE':>7s}"]
    for r in kpi_rows:
        lines.append(f"{r['model']:7s} {r['variant']:7s} {r['rmse']:7.3f} {r['mae']:7.3f} {r['mbe']:7.3f}")
    for d in delta_rows:
        lines.append(f"{d['model']:7s} dRMSE static->FEM {d['delta_rmse']:+.3f} K ({d['delta_rmse_pct']:+.1f}%)")
    lines.extend(f"{m:7s} FAILED: {msg}" for m, msg in failures.items())
    lines.extend(f"warning: {w}" for w in warnings)
    write_text(out / "run_summary.txt", lines)
    print("\n".join(lines))
    if not kpi_rows:
        return EXIT_DEGRADED
    return EXIT_DEGRADED if failures or warnings else EXIT_OK


# --- synth -------------------------------------------------------------------------

_SYNTH_FIELDS = {f.name for f in dataclasses.fields(synth.SynthSpec)}


def synth_specs(args) -> list[synth.SynthSpec]:
    raw = {}
    if args.config:
        raw = read_yaml(args.config)
        raw = raw.get("synth", raw)
    raw = apply_env({"synth": raw}).get("synth") or {}
    if not isinstance(raw, dict):
        raise ConfigError("synth config must be a mapping")
    unknown = sorted(set(raw) - _SYNTH_FIELDS - {"models"})
    if unknown:
        raise ConfigError(f"unknown synth key(s): {', '.join(unknown)}")
    models = parse_models(args.models or raw.pop("models", None) or [raw.get("model", "wm1")])
    raw.pop("models", None)
    raw.pop("model", None)
    if args.seed is not None:
        raw["seed"] = args.seed
    if args.tau is not None:
        raw["tau"] = args.tau
    site = raw.pop("site_id", "synthetic")
    try:
        return [synth.SynthSpec(model=m, site_id=f"{site}_{m}", **raw) for m in models]
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid synth spec: {exc}") from None


def cmd_synth(args) -> int:
    out = Path(args.out or "synthetic")
    for spec in synth_specs(args):
        csv_path, _ = synth.write(spec, out)
        run_cfg = {"dataset": {"path": csv_path.name, "dt": spec.dt, "site_id": spec.site_id},
                   "models": [spec.model], "output": f"out_{spec.site_id}"}
        with open(out / f"{spec.site_id}_run.yaml", "w") as fh:
            yaml.safe_dump(run_cfg, fh, sort_keys=True)
        print(f"wrote {csv_path}")
    return EXIT_OK


# --- entry point -------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pvfem", description=(
        "PV module over-temperature models with the filter / EWM / bias correction method."))
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, models=True):
        p.add_argument("--config", help="YAML config file")
        p.add_argument("--out", help="output directory")
        if models:
            p.add_argument("--models", help="comma-separated model list")
            p.add_argument("--tau", type=float, help="time constant override [s]")

    p = sub.add_parser("rc", help="theoretical R, C and tau of a layer stack")
    common(p, models=False)
    p.add_argument("--remove-layer", metavar="PREFIX", help="zero the thickness of matching layers")
    p.set_defaults(func=cmd_rc)

    p = sub.add_parser("fit", help="fit coefficients, R-values and tau on the training set")
    common(p)
    p.add_argument("--emit-plot-data", action="store_true", help=argparse.SUPPRESS)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("run", help="static, EWM and FEM variants with KPI and energy reports")
    common(p)
    p.add_argument("--emit-plot-data", action="store_true", help="write per-row plot data")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("synth", help="generate synthetic datasets with known truth")
    common(p)
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_synth)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, DataError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except fit.FitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DEGRADED
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
