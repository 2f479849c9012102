import json
from pathlib import Path

import numpy as np
import pytest
from click.testing import CliRunner

from innovae.cli import main


@pytest.fixture
def runner():
    return CliRunner()


def synth_csv(runner, tmp_path, n=700, phi=0.8, seed=3, name="data.csv"):
    path = tmp_path / name
    result = runner.invoke(
        main, ["synth", "--phi", str(phi), "--n", str(n), "--seed", str(seed),
               "--out", str(path)],
    )
    assert result.exit_code == 0, result.output
    return path


def train_config(tmp_path, data_path, name="config.json", **extra):
    cfg = {
        "data_csv": str(data_path),
        "m": 8,
        "horizon": 1,
        "epochs": 2,
        "batch_size": 64,
        "seed": 5,
        "out_dir": str(tmp_path / "run"),
    }
    cfg.update(extra)
    path = tmp_path / name
    path.write_text(json.dumps(cfg))
    return path


class TestSynth:
    def test_writes_canonical_csv(self, runner, tmp_path):
        path = synth_csv(runner, tmp_path, n=50)
        lines = path.read_text().splitlines()
        assert lines[0] == "timestamp,x"
        assert len(lines) == 51

    def test_rejects_nonstationary(self, runner, tmp_path):
        result = runner.invoke(
            main, ["synth", "--phi", "1.2", "--n", "10", "--out", str(tmp_path / "x.csv")]
        )
        assert result.exit_code == 2
        assert "non-stationary" in result.output


class TestTrain:
    def test_smoke_writes_checkpoint_and_log(self, runner, tmp_path):
        data = synth_csv(runner, tmp_path)
        cfg = train_config(tmp_path, data)
        result = runner.invoke(main, ["train", "--config", str(cfg)])
        assert result.exit_code == 0, result.output
        out = json.loads(result.output)
        assert Path(out["checkpoint"]).exists()
        log_lines = Path(out["log"]).read_text().splitlines()
        assert len(log_lines) == 2  # one record per epoch
        assert {"epoch", "innovation_w", "total"} <= set(json.loads(log_lines[0]))

    def test_invalid_window_fails_before_training(self, runner, tmp_path):
        data = synth_csv(runner, tmp_path, n=60)
        cfg = train_config(tmp_path, data, m=2, horizon=3)
        result = runner.invoke(main, ["train", "--config", str(cfg)])
        assert result.exit_code == 2
        assert "horizon" in result.output

    def test_missing_data_file(self, runner, tmp_path):
        cfg = train_config(tmp_path, tmp_path / "nope.csv")
        result = runner.invoke(main, ["train", "--config", str(cfg)])
        assert result.exit_code == 2
        err = json.loads(result.output.strip().splitlines()[-1])
        assert "nope.csv" in err["error"]

    def test_unknown_config_key_rejected(self, runner, tmp_path):
        data = synth_csv(runner, tmp_path, n=60)
        path = tmp_path / "config.json"
        path.write_text(json.dumps({"data_csv": str(data), "learning_rate": 0.1}))
        result = runner.invoke(main, ["train", "--config", str(path)])
        assert result.exit_code == 2
        assert "learning_rate" in result.output

    def test_replay_is_byte_identical(self, runner, tmp_path):
        data = synth_csv(runner, tmp_path)
        cfg_a = train_config(tmp_path, data, name="a.json", out_dir=str(tmp_path / "a"))
        cfg_b = train_config(tmp_path, data, name="b.json", out_dir=str(tmp_path / "b"))
        assert runner.invoke(main, ["train", "--config", str(cfg_a)]).exit_code == 0
        assert runner.invoke(main, ["train", "--config", str(cfg_b)]).exit_code == 0
        bytes_a = (tmp_path / "a" / "checkpoint.wiae").read_bytes()
        bytes_b = (tmp_path / "b" / "checkpoint.wiae").read_bytes()
        assert bytes_a == bytes_b


@pytest.fixture
def trained(runner, tmp_path):
    data = synth_csv(runner, tmp_path)
    cfg = train_config(tmp_path, data, train_steps=600)
    result = runner.invoke(main, ["train", "--config", str(cfg)])
    assert result.exit_code == 0, result.output
    ckpt = json.loads(result.output)["checkpoint"]
    return data, ckpt


class TestForecast:
    def test_default_is_1000_samples(self, runner, tmp_path, trained):
        data, ckpt = trained
        out_dir = tmp_path / "fc"
        result = runner.invoke(
            main, ["forecast", "--checkpoint", ckpt, "--data", str(data),
                   "--origins", "last", "--out-dir", str(out_dir)],
        )
        assert result.exit_code == 0, result.output
        info = json.loads(result.output)
        assert info["samples"] == 1000
        assert len((out_dir / "ensemble.csv").read_text().splitlines()) == 1001

    def test_same_seed_same_bytes(self, runner, tmp_path, trained):
        data, ckpt = trained
        outs = []
        for name in ("f1", "f2"):
            out_dir = tmp_path / name
            result = runner.invoke(
                main, ["forecast", "--checkpoint", ckpt, "--data", str(data),
                       "--samples", "64", "--seed", "9", "--origins", "650:660",
                       "--out-dir", str(out_dir)],
            )
            assert result.exit_code == 0, result.output
            outs.append((out_dir / "ensemble.csv").read_bytes())
        assert outs[0] == outs[1]

    def test_horizon_beyond_trained_rejected(self, runner, tmp_path, trained):
        data, ckpt = trained
        result = runner.invoke(
            main, ["forecast", "--checkpoint", ckpt, "--data", str(data),
                   "--horizon", "4", "--out-dir", str(tmp_path / "x")],
        )
        assert result.exit_code == 2
        assert "horizon" in result.output

    def test_bad_checkpoint_path(self, runner, tmp_path, trained):
        data, _ = trained
        result = runner.invoke(
            main, ["forecast", "--checkpoint", str(tmp_path / "no.wiae"),
                   "--data", str(data), "--out-dir", str(tmp_path / "x")],
        )
        assert result.exit_code == 2


class TestEvaluateAndDiagnose:
    @pytest.fixture
    def forecast_run(self, runner, tmp_path, trained):
        data, ckpt = trained
        out_dir = tmp_path / "fc"
        result = runner.invoke(
            main, ["forecast", "--checkpoint", ckpt, "--data", str(data),
                   "--samples", "200", "--seed", "1", "--origins", "620:690",
                   "--out-dir", str(out_dir)],
        )
        assert result.exit_code == 0, result.output
        return data, out_dir

    def test_evaluate_report_fields(self, runner, tmp_path, forecast_run):
        data, out_dir = forecast_run
        report_path = tmp_path / "metrics.json"
        result = runner.invoke(
            main, ["evaluate", "--summary", str(out_dir / "summary.csv"),
                   "--ensembles", str(out_dir / "ensemble.csv"),
                   "--truth", str(data), "--per", "--out", str(report_path)],
        )
        assert result.exit_code == 0, result.output
        report = json.loads(report_path.read_text())
        for key in ("nmse", "nmae", "mase", "smape", "crps", "intervals", "per"):
            assert key in report
        assert set(report["intervals"]) == {"0.9", "0.5", "0.1"}
        assert report["evaluated"] + report["excluded"] == report["meta"]["origins"]

    def test_filter_flag_reports_exclusions(self, runner, tmp_path, forecast_run):
        data, out_dir = forecast_run
        # poison one truth value inside the evaluated range with a huge spike
        lines = data.read_text().splitlines()
        stamp, _ = lines[660].split(",", 1)
        lines[660] = f"{stamp},1e4"
        spiked = tmp_path / "spiked.csv"
        spiked.write_text("\n".join(lines) + "\n")
        result = runner.invoke(
            main, ["evaluate", "--summary", str(out_dir / "summary.csv"),
                   "--ensembles", str(out_dir / "ensemble.csv"),
                   "--truth", str(spiked), "--filter-3sigma"],
        )
        assert result.exit_code == 0, result.output
        report = json.loads(result.output)
        assert report["excluded"] == 1

    def test_evaluate_misaligned_truth(self, runner, tmp_path, forecast_run):
        data, out_dir = forecast_run
        truncated = tmp_path / "short.csv"
        truncated.write_text("\n".join(data.read_text().splitlines()[:200]) + "\n")
        result = runner.invoke(
            main, ["evaluate", "--summary", str(out_dir / "summary.csv"),
                   "--truth", str(truncated)],
        )
        assert result.exit_code == 2

    def test_diagnose_outputs_json(self, runner, tmp_path):
        rng = np.random.default_rng(0)
        path = tmp_path / "noise.csv"
        lines = ["timestamp,x"]
        from datetime import datetime, timedelta

        t0 = datetime(2023, 1, 1)
        for k, v in enumerate(rng.standard_normal(4096)):
            lines.append(f"{(t0 + k * timedelta(minutes=5)).isoformat()},{float(v)!r}")
        path.write_text("\n".join(lines) + "\n")
        result = runner.invoke(main, ["diagnose", "--data", str(path)])
        assert result.exit_code == 0, result.output
        doc = json.loads(result.output)
        assert 0.2 < doc["hurst_rs"] < 0.8
        assert 0.2 < doc["dfa"] < 0.8
        assert len(doc["dfa_table"]["block_sizes"]) >= 3

    def test_diagnose_too_short(self, runner, tmp_path):
        path = tmp_path / "short.csv"
        from datetime import datetime, timedelta

        t0 = datetime(2023, 1, 1)
        rows = [f"{(t0 + k * timedelta(minutes=5)).isoformat()},{float(k)}" for k in range(100)]
        path.write_text("timestamp,x\n" + "\n".join(rows) + "\n")
        result = runner.invoke(main, ["diagnose", "--data", str(path)])
        assert result.exit_code == 2
