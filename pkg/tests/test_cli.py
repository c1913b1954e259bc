"""Command-line entry point: subcommands, exit codes and flag precedence."""

import json
import subprocess
import sys

import pytest
import yaml

from conftest import SMALL_STUDY
from osnrnn.cli import EXIT_DATA, EXIT_OK, EXIT_PARTIAL, EXIT_USAGE, main


def last_json(text):
    return json.loads(text[text.index("{"):])


@pytest.fixture(scope="module")
def cli_run(tmp_path_factory, small_config_file):
    """generate + train through the CLI once for the whole module."""
    out = tmp_path_factory.mktemp("cli")
    assert main(["generate", "--config", str(small_config_file), "--seed", "4", "--count", "14",
                 "--out", str(out), "--frames"]) == EXIT_OK
    assert main(["train", str(out / "dataset.jsonl"), "--config", str(small_config_file),
                 "--out", str(out)]) == EXIT_OK
    return out


class TestCommands:
    def test_generate_reports_summary(self, cli_run, capsys, small_config_file):
        code = main(["generate", "--config", str(small_config_file), "--seed", "4", "--count", "14",
                     "--out", str(cli_run)])
        summary = last_json(capsys.readouterr().out)
        assert code == EXIT_OK and summary["resumed_from"] == 14 and summary["count"] == 14

    def test_train_outputs(self, cli_run):
        for name in ("model.json", "model.history.csv", "model.split.json"):
            assert (cli_run / name).exists()

    def test_eval_writes_csvs(self, cli_run, capsys, small_config_file, tmp_path):
        code = main(["eval", str(cli_run / "dataset.jsonl"), str(cli_run / "model.json"),
                     "--split", str(cli_run / "model.split.json"), "--config", str(small_config_file),
                     "--out", str(tmp_path)])
        rep = last_json(capsys.readouterr().out)
        assert code == EXIT_OK and "offset" in rep and "sigma" in rep
        assert (tmp_path / "eval_summary.csv").exists() and (tmp_path / "eval_ccdf.csv").exists()

    def test_eval_oracle_needs_no_model(self, cli_run, capsys, small_config_file, tmp_path):
        code = main(["eval", str(cli_run / "dataset.jsonl"), "--oracle", "--subset", "all",
                     "--config", str(small_config_file), "--out", str(tmp_path)])
        assert code == EXIT_OK
        assert abs(last_json(capsys.readouterr().out)["offset"]) < 0.1

    def test_report(self, cli_run, capsys, small_config_file, tmp_path):
        code = main(["report", str(cli_run / "dataset.jsonl"), str(cli_run / "model.json"),
                     "--split", str(cli_run / "model.split.json"), "--history", str(cli_run / "model.history.csv"),
                     "--config", str(small_config_file), "--out", str(tmp_path), "--format", "png"])
        assert code == EXIT_OK
        assert len(last_json(capsys.readouterr().out)["figures"]) == 4
        assert (tmp_path / "ccdf.png").read_bytes()[:4] == b"\x89PNG"

    def test_estimate_round_trip(self, cli_run, capsys, small_config_file):
        frame = sorted((cli_run / "frames").glob("*.symf"))[0]
        meta = frame.with_suffix("").with_suffix(".meta.json")
        code = main(["estimate", str(frame), str(meta), str(cli_run / "model.json"),
                     "--config", str(small_config_file)])
        res = last_json(capsys.readouterr().out)
        assert code == EXIT_OK
        assert {"osnr_db", "snr_nl_db", "esnr_db", "valid", "reason"} <= set(res)


class TestCalibrationPrecedence:
    def test_flag_over_file_over_default(self, cli_run, capsys, tmp_path):
        frame = sorted((cli_run / "frames").glob("*.symf"))[0]
        meta = frame.with_suffix("").with_suffix(".meta.json")
        base = ["estimate", str(frame), str(meta), str(cli_run / "model.json")]

        assert main(base) == EXIT_OK
        assert last_json(capsys.readouterr().out)["eye_closure"] == 1.0

        cfg = tmp_path / "cal.yaml"
        cfg.write_text(yaml.safe_dump({**SMALL_STUDY, "calibration": {"eye_closure": 1.1, "snr_imp_db": 30.0}}))
        assert main(base + ["--config", str(cfg)]) == EXIT_OK
        res = last_json(capsys.readouterr().out)
        assert res["eye_closure"] == 1.1 and res["snr_imp_db"] == pytest.approx(30.0)

        assert main(base + ["--config", str(cfg), "--ec", "1.2"]) == EXIT_OK
        res = last_json(capsys.readouterr().out)
        assert res["eye_closure"] == 1.2 and res["snr_imp_db"] == pytest.approx(30.0)


class TestExitCodes:
    def test_usage_errors(self, capsys):
        with pytest.raises(SystemExit) as e:
            main(["generate"])
        assert e.value.code == EXIT_USAGE
        with pytest.raises(SystemExit) as e:
            main(["frobnicate"])
        assert e.value.code == EXIT_USAGE
        assert main(["eval", "data.jsonl"]) == EXIT_USAGE
        assert main(["generate", "--count", "1", "--threads", "0"]) == EXIT_USAGE

    def test_corrupted_frame(self, cli_run, capsys, tmp_path):
        frame = sorted((cli_run / "frames").glob("*.symf"))[0]
        bad = tmp_path / "bad.symf"
        bad.write_bytes(frame.read_bytes()[:100])
        code = main(["estimate", str(bad), str(frame.with_suffix("").with_suffix(".meta.json")),
                     str(cli_run / "model.json")])
        err = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
        assert code == EXIT_DATA and err["error"] == "FrameFormatError"

    def test_missing_dataset_and_bad_config(self, capsys, tmp_path):
        assert main(["train", str(tmp_path / "none.jsonl"), "--out", str(tmp_path)]) == EXIT_DATA
        cfg = tmp_path / "bad.yaml"
        cfg.write_text("channel_plan: {n_channels: -3}\n")
        assert main(["generate", "--count", "1", "--config", str(cfg), "--out", str(tmp_path)]) == EXIT_DATA

    def test_failure_threshold(self, capsys, tmp_path):
        cfg = tmp_path / "fail.yaml"
        cfg.write_text(yaml.safe_dump({**SMALL_STUDY, "scenario": {**SMALL_STUDY["scenario"], "fec_ber": 1e-300}}))
        code = main(["generate", "--count", "2", "--config", str(cfg), "--out", str(tmp_path)])
        assert code == EXIT_PARTIAL

    def test_env_out_directory(self, capsys, tmp_path, monkeypatch, small_config_file):
        monkeypatch.setenv("OSNRNN_OUT", str(tmp_path))
        assert main(["generate", "--count", "1", "--config", str(small_config_file)]) == EXIT_OK
        assert (tmp_path / "dataset.jsonl").exists()

    def test_console_script(self):
        r = subprocess.run([sys.executable, "-m", "osnrnn.cli", "--help"], capture_output=True, text=True)
        assert r.returncode == 0 and "generate" in r.stdout
