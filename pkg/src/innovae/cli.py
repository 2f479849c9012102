"""Command-line entry point: synth -> train -> forecast -> evaluate -> diagnose.

Runs are driven by a flat JSON config file (documented keys below); any flag
repeated on the command line overrides the config value.  Exit codes: 0 ok,
1 runtime failure, 2 usage or config error.  Failures print one JSON line on
stderr: {"error": "...", ...}.
"""

from __future__ import annotations

import csv
import json
import sys
from datetime import datetime, timedelta
from pathlib import Path

import click
import numpy as np

from .checkpoint import load_checkpoint, save_checkpoint
from .diagnostics import dfa, hurst_rs
from .forecasting import (
    DEFAULT_SAMPLES,
    batched_gpf_samples,
    interval,
    write_ensemble_csv,
    write_summary_csv,
)
from .ingest import IngestError, load_canonical_csv, write_csv
from .metrics import evaluate_forecasts
from .nets import NetConfig
from .oracle import ArProcess, gen_ar
from .series import SeriesFrame
from .training import TrainConfig, TrainingDiverged, train

EXIT_RUNTIME = 1
EXIT_USAGE = 2

# Every key a run config may carry, with defaults.  Unknown keys are rejected.
CONFIG_DEFAULTS: dict = {
    "data_csv": None,           # training data in canonical CSV form
    "train_steps": None,        # leading steps used for training (default: all)
    "m": 16,
    "horizon": 1,
    "latent_dim": None,
    "hidden": 32,
    "critic_hidden": None,
    "lambda_weight": 1.0,
    "critic_steps": 5,
    "grad_penalty": 10.0,
    "lr": 1e-3,
    "lr_min": None,
    "beta1": 0.5,
    "beta2": 0.9,
    "adam_eps": 1e-8,
    "batch_size": 64,
    "epochs": 20,
    "seed": 0,
    "threads": 1,
    "validation_fraction": 0.1,
    "select": "final",
    "parameter_averaging": None,
    "samples": DEFAULT_SAMPLES,  # Monte-Carlo draws per forecast origin
    "forecast_seed": 0,
    "beta_levels": [0.9, 0.5, 0.1],
    "filter_3sigma": False,
    "per": False,
    "out_dir": "runs",
}


def _fail(code: int, message: str, **extra) -> None:
    payload = {"error": message}
    payload.update(extra)
    click.echo(json.dumps(payload, sort_keys=True), err=True)
    sys.exit(code)


def _load_config(path: str | None, overrides: dict) -> dict:
    cfg = dict(CONFIG_DEFAULTS)
    if path is not None:
        try:
            raw = json.loads(Path(path).read_text(encoding="utf-8"))
        except FileNotFoundError:
            _fail(EXIT_USAGE, f"config file not found: {path}", path=str(path))
        except json.JSONDecodeError as exc:
            _fail(EXIT_USAGE, f"config is not valid JSON: {exc}", path=str(path))
        unknown = sorted(set(raw) - set(CONFIG_DEFAULTS))
        if unknown:
            _fail(EXIT_USAGE, f"unknown config keys: {unknown}", path=str(path))
        cfg.update(raw)
    cfg.update({k: v for k, v in overrides.items() if v is not None})
    return cfg


def _load_series(path: str) -> SeriesFrame:
    p = Path(path)
    if not p.exists():
        _fail(EXIT_USAGE, f"data file not found: {path}", path=str(path))
    try:
        return load_canonical_csv(p)
    except IngestError as exc:
        _fail(EXIT_USAGE, str(exc), path=str(path))


@click.group()
def main():
    """Generative probabilistic forecasting toolchain."""


@main.command()
@click.option("--phi", multiple=True, type=float, required=True,
              help="AR coefficients, repeat for higher order.")
@click.option("--sigma", type=float, default=1.0, show_default=True)
@click.option("--n", type=int, required=True, help="Series length after burn-in.")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--burn-in", type=int, default=1000, show_default=True)
@click.option("--step-seconds", type=float, default=300.0, show_default=True)
@click.option("--out", type=click.Path(dir_okay=False), required=True)
def synth(phi, sigma, n, seed, burn_in, step_seconds, out):
    """Generate a stationary AR sample path as a canonical CSV."""
    try:
        process = ArProcess(coefficients=tuple(phi), noise_std=sigma)
    except ValueError as exc:
        _fail(EXIT_USAGE, str(exc))
    frame = gen_ar(process, n, seed=seed, burn_in=burn_in,
                   step=timedelta(seconds=step_seconds))
    write_csv(out, frame)
    click.echo(json.dumps({"written": str(out), "n": n, "channels": list(frame.channels)}))


@main.command(name="train")
@click.option("--config", "config_path", type=click.Path(dir_okay=False), default=None)
@click.option("--data", "data_csv", type=click.Path(dir_okay=False), default=None)
@click.option("--epochs", type=int, default=None)
@click.option("--seed", type=int, default=None)
@click.option("--m", type=int, default=None)
@click.option("--horizon", type=int, default=None)
@click.option("--train-steps", type=int, default=None)
@click.option("--out-dir", type=click.Path(file_okay=False), default=None)
def cmd_train(config_path, **overrides):
    """Fit the autoencoder and critics; write checkpoint and loss log."""
    cfg = _load_config(config_path, overrides)
    if cfg["data_csv"] is None:
        _fail(EXIT_USAGE, "no training data: set data_csv in the config or pass --data")
    series = _load_series(cfg["data_csv"])
    if cfg["train_steps"] is not None:
        if not 1 < int(cfg["train_steps"]) <= len(series):
            _fail(EXIT_USAGE, f"train_steps must be in 2..{len(series)}")
        series = series.slice(0, int(cfg["train_steps"]))
    try:
        net = NetConfig(
            m=int(cfg["m"]), channels=series.n_channels, horizon=int(cfg["horizon"]),
            latent_dim=cfg["latent_dim"], hidden=int(cfg["hidden"]),
            critic_hidden=None if cfg["critic_hidden"] is None else int(cfg["critic_hidden"]),
        )
        tcfg = TrainConfig(
            lambda_weight=float(cfg["lambda_weight"]), critic_steps=int(cfg["critic_steps"]),
            grad_penalty=float(cfg["grad_penalty"]), lr=float(cfg["lr"]),
            lr_min=None if cfg["lr_min"] is None else float(cfg["lr_min"]),
            beta1=float(cfg["beta1"]), beta2=float(cfg["beta2"]),
            adam_eps=float(cfg["adam_eps"]), batch_size=int(cfg["batch_size"]),
            epochs=int(cfg["epochs"]), seed=int(cfg["seed"]), threads=int(cfg["threads"]),
            validation_fraction=float(cfg["validation_fraction"]), select=str(cfg["select"]),
            parameter_averaging=(
                None if cfg["parameter_averaging"] is None
                else float(cfg["parameter_averaging"])
            ),
        )
    except ValueError as exc:
        _fail(EXIT_USAGE, f"invalid configuration: {exc}")
    out_dir = Path(cfg["out_dir"])
    out_dir.mkdir(parents=True, exist_ok=True)
    log_path = out_dir / "training_log.ndjson"
    ckpt_path = out_dir / "checkpoint.wiae"
    try:
        with open(log_path, "w", encoding="utf-8") as log:
            ckpt, _ = train(series, net, tcfg, log_sink=log)
    except TrainingDiverged as exc:
        _fail(EXIT_RUNTIME, f"training diverged: {exc}")
    except ValueError as exc:
        _fail(EXIT_USAGE, f"invalid training setup: {exc}")
    save_checkpoint(ckpt, ckpt_path)
    click.echo(json.dumps({"checkpoint": str(ckpt_path), "log": str(log_path)}))


def _parse_origins(text: str | None, series: SeriesFrame, m: int, horizon: int) -> np.ndarray:
    last_valid = len(series) - 1 - horizon
    if text is None or text == "last":
        return np.array([len(series) - 1], dtype=np.int64)
    if ":" in text:
        lo_s, hi_s = text.split(":", 1)
        lo = int(lo_s) if lo_s else m - 1
        hi = int(hi_s) if hi_s else last_valid + 1
        if lo < m - 1 or hi > len(series) or lo >= hi:
            _fail(EXIT_USAGE, f"origin range {text!r} outside [{m - 1}, {len(series)})")
        return np.arange(lo, hi, dtype=np.int64)
    t = int(text)
    if not m - 1 <= t < len(series):
        _fail(EXIT_USAGE, f"origin {t} outside [{m - 1}, {len(series)})")
    return np.array([t], dtype=np.int64)


@main.command(name="forecast")
@click.option("--checkpoint", "ckpt_path", type=click.Path(dir_okay=False), required=True)
@click.option("--data", "data_csv", type=click.Path(dir_okay=False), required=True)
@click.option("--horizon", type=int, default=None, help="Defaults to the trained horizon.")
@click.option("--samples", type=int, default=DEFAULT_SAMPLES, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--origins", default="last", show_default=True,
              help="'last', one index, or an index range 'start:stop'.")
@click.option("--out-dir", type=click.Path(file_okay=False), default="runs", show_default=True)
def cmd_forecast(ckpt_path, data_csv, horizon, samples, seed, origins, out_dir):
    """Write Monte-Carlo ensembles and their summary for chosen origins."""
    try:
        ckpt = load_checkpoint(ckpt_path)
    except (OSError, ValueError) as exc:
        _fail(EXIT_USAGE, f"cannot load checkpoint: {exc}", path=str(ckpt_path))
    series = _load_series(data_csv)
    origin_idx = _parse_origins(origins, series, ckpt.config.m, horizon or ckpt.config.horizon)
    try:
        ensembles = batched_gpf_samples(
            ckpt, series, origin_idx, n_samples=samples, seed=seed, horizon=horizon
        )
    except ValueError as exc:
        _fail(EXIT_USAGE, str(exc))
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    ens_path, sum_path = out / "ensemble.csv", out / "summary.csv"
    write_ensemble_csv(ens_path, ensembles)
    write_summary_csv(sum_path, ensembles)
    click.echo(json.dumps({"ensemble": str(ens_path), "summary": str(sum_path),
                           "origins": int(origin_idx.size), "samples": samples}))


def _read_summary(path: str, channel: str | None):
    rows = []
    with open(path, "r", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        for row in reader:
            rows.append(row)
    if not rows:
        _fail(EXIT_USAGE, f"empty summary file: {path}")
    channels = sorted({r["channel"] for r in rows})
    chosen = channel or channels[0]
    rows = [r for r in rows if r["channel"] == chosen]
    if not rows:
        _fail(EXIT_USAGE, f"channel {chosen!r} not in summary (has {channels})")
    return rows, chosen


def _read_ensembles(path: str, channel: str, origin_times: list[datetime]) -> np.ndarray:
    by_origin: dict[datetime, list[float]] = {t: [] for t in origin_times}
    with open(path, "r", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if channel not in (reader.fieldnames or []):
            _fail(EXIT_USAGE, f"channel {channel!r} not in ensemble file")
        for row in reader:
            stamp = datetime.fromisoformat(row["origin_time"])
            if stamp in by_origin:
                by_origin[stamp].append(float(row[channel]))
    counts = {len(v) for v in by_origin.values()}
    if counts == {0} or 0 in counts or len(counts) != 1:
        _fail(EXIT_USAGE, "ensemble file does not cover every summary origin evenly")
    return np.array([by_origin[t] for t in origin_times])


@main.command(name="evaluate")
@click.option("--summary", "summary_path", type=click.Path(dir_okay=False), required=True)
@click.option("--truth", "truth_path", type=click.Path(dir_okay=False), required=True)
@click.option("--ensembles", "ensembles_path", type=click.Path(dir_okay=False), default=None,
              help="Ensemble CSV; enables CRPS and exact intervals at every level.")
@click.option("--channel", default=None)
@click.option("--horizon", type=int, default=None,
              help="Forecast horizon in steps; read from the ensemble file when omitted.")
@click.option("--filter-3sigma", is_flag=True, default=False)
@click.option("--per", "with_per", is_flag=True, default=False,
              help="Also report the sign-direction error rate.")
@click.option("--betas", default="0.9,0.5,0.1", show_default=True)
@click.option("--out", "out_path", type=click.Path(dir_okay=False), default=None)
def cmd_evaluate(summary_path, truth_path, ensembles_path, channel, horizon,
                 filter_3sigma, with_per, betas, out_path):
    """Score a forecast run against the realized series; print a JSON report."""
    rows, chosen = _read_summary(summary_path, channel)
    truth = _load_series(truth_path)
    if chosen in truth.channels:
        t_col = truth.channels.index(chosen)
    elif truth.n_channels == 1:
        t_col = 0
    else:
        _fail(EXIT_USAGE, f"channel {chosen!r} not in truth file")
    origin_times = [datetime.fromisoformat(r["origin_time"]) for r in rows]
    if any(b - a != truth.step for a, b in zip(origin_times, origin_times[1:])):
        _fail(EXIT_USAGE, "summary origins are not consecutive on the truth grid")
    if horizon is None:
        horizon = _horizon_from_ensemble(ensembles_path) if ensembles_path else 1

    first_target = origin_times[0] + horizon * truth.step
    idx0 = (first_target - truth.start_time) / truth.step
    if abs(idx0 - round(idx0)) > 1e-9:
        _fail(EXIT_USAGE, "summary origins are off the truth grid")
    idx0 = int(round(idx0))
    idx_last = idx0 + len(rows) - 1
    if idx0 - horizon < 0 or idx_last >= len(truth):
        _fail(EXIT_USAGE, "truth file does not cover the forecast targets")
    truth_full = truth.values[idx0 - horizon : idx_last + 1, t_col]

    mmse_col = np.array([float(r["mmse"]) for r in rows])
    mmae_col = np.array([float(r["mmae"]) for r in rows])
    levels = [float(b) for b in betas.split(",") if b]
    bounds: dict[float, tuple[np.ndarray, np.ndarray]] = {}
    ens = None
    if ensembles_path:
        ens = _read_ensembles(ensembles_path, chosen, origin_times)
        for level in levels:
            los, his = [], []
            for i in range(ens.shape[0]):
                band = interval(_bare_ensemble(ens[i]), level)
                los.append(band.lower[0])
                his.append(band.upper[0])
            bounds[level] = (np.array(los), np.array(his))
    else:
        from_summary = {0.9: ("q05", "q95"), 0.5: ("q25", "q75")}
        for level in levels:
            if level in from_summary:
                lo_k, hi_k = from_summary[level]
                bounds[level] = (
                    np.array([float(r[lo_k]) for r in rows]),
                    np.array([float(r[hi_k]) for r in rows]),
                )
    digests = {"truth": _digest(truth_path), "summary": _digest(summary_path)}
    if ensembles_path:
        digests["ensembles"] = _digest(ensembles_path)
    try:
        report = evaluate_forecasts(
            truth_full, mmse_col, mmae_col, horizon,
            interval_bounds=bounds, ensembles=ens,
            filter_outliers=filter_3sigma, include_sign_error=with_per,
            meta={
                "horizon": horizon, "channel": chosen, "beta_levels": levels,
                "origins": len(rows), "filter_3sigma": filter_3sigma,
                "summary": str(summary_path), "truth": str(truth_path),
                "digests": digests,
            },
        )
    except ValueError as exc:
        _fail(EXIT_RUNTIME, f"evaluation failed: {exc}")
    doc = report.to_json()
    if out_path:
        Path(out_path).write_text(doc + "\n", encoding="utf-8")
    click.echo(doc)


def _digest(path) -> str:
    import hashlib

    return hashlib.sha256(Path(path).read_bytes()).hexdigest()[:16]


def _horizon_from_ensemble(path: str) -> int:
    with open(path, "r", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        row = next(reader, None)
    if row is None:
        _fail(EXIT_USAGE, f"empty ensemble file: {path}")
    return int(row["horizon_steps"])


def _bare_ensemble(samples: np.ndarray):
    from .forecasting import ForecastEnsemble

    return ForecastEnsemble(
        origin_time=datetime(2000, 1, 1), horizon=1,
        samples=samples[:, None], channels=("x",),
    )


@main.command(name="diagnose")
@click.option("--data", "data_csv", type=click.Path(dir_okay=False), required=True)
@click.option("--channel", default=None)
@click.option("--out", "out_path", type=click.Path(dir_okay=False), default=None)
def cmd_diagnose(data_csv, channel, out_path):
    """Long-range dependence report: rescaled-range and DFA exponents."""
    series = _load_series(data_csv)
    col = series.channels.index(channel) if channel else 0
    x = series.values[:, col]
    try:
        rs_fit = hurst_rs(x, return_fit=True)
        dfa_fit = dfa(x, return_fit=True)
    except ValueError as exc:
        _fail(EXIT_USAGE, str(exc))
    doc = json.dumps(
        {
            "channel": series.channels[col],
            "n": len(series),
            "hurst_rs": rs_fit.exponent,
            "dfa": dfa_fit.exponent,
            "hurst_rs_table": {"block_sizes": list(rs_fit.block_sizes),
                               "rs": list(rs_fit.statistics)},
            "dfa_table": {"block_sizes": list(dfa_fit.block_sizes),
                          "fluctuation": list(dfa_fit.statistics)},
        },
        sort_keys=True, indent=2,
    )
    if out_path:
        Path(out_path).write_text(doc + "\n", encoding="utf-8")
    click.echo(doc)


if __name__ == "__main__":
    main()
