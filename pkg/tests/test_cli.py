import csv
import subprocess
import sys

import pytest
import yaml

from outbreak_onset.cli import main
from outbreak_onset.config import ExperimentConfig


def _run(*argv):
    return main([str(a) for a in argv])


def _csv_bytes(root):
    return {p.relative_to(root).as_posix(): p.read_bytes() for p in sorted(root.rglob("*.csv"))}


def test_print_config_roundtrips(capsys, small_config):
    assert _run("print-config") == 0
    assert yaml.safe_load(capsys.readouterr().out) == ExperimentConfig().to_dict()
    assert _run("print-config", "--config", small_config(), "--seed", 11) == 0
    assert yaml.safe_load(capsys.readouterr().out)["master_seed"] == 11


def test_simulate_writes_pools_deterministically(tmp_path, small_config):
    cfg = small_config()
    assert _run("simulate", "--config", cfg, "--out", tmp_path / "a", "--threads", 1) == 0
    assert _run("simulate", "--config", cfg, "--out", tmp_path / "b", "--threads", 3) == 0
    files = _csv_bytes(tmp_path / "a")
    assert sorted(files) == [f"descriptors/D{k}.csv" for k in range(1, 6)]
    for name, data in files.items():
        rows = list(csv.reader(data.decode().splitlines()))
        assert len(rows) == 1 + 12
        assert rows[0][:3] == ["case_id", "timestamp", "label"]
    assert files == _csv_bytes(tmp_path / "b")
    assert (tmp_path / "a" / "config.yaml").exists()


def test_sweep_table_shape_and_determinism(tmp_path, small_config):
    cfg = small_config()
    assert _run("sweep", "--config", cfg, "--out", tmp_path / "a", "--threads", 1, "--traces", 1, "--streams", 1) == 0
    assert _run("sweep", "--config", cfg, "--out", tmp_path / "b", "--threads", 2, "--traces", 1, "--streams", 1) == 0
    a, b = _csv_bytes(tmp_path / "a"), _csv_bytes(tmp_path / "b")
    assert a == b
    rows = list(csv.DictReader(a["results.csv"].decode().splitlines()))
    assert len(rows) == 2 * 2 * 2
    assert list(rows[0]) == ["score", "w_s", "R", "mean_latency", "detection_rate", "fp_per_100_days", "n_replicates", "n_detected"]
    assert {(r["score"], r["w_s"], r["R"]) for r in rows} == {
        (s, w, R) for s in ("ped", "kde") for w in ("4", "6") for R in ("1.1", "1.3")
    }
    for name in ("model.bin", "calibration.json", "results.json", "train.json"):
        assert (tmp_path / "a" / name).exists()
    assert "traces/R1.1_w4_rep000.csv" in a and "streams/R1.3_rep000.csv" in a
    # a rerun into the same directory reuses stored stages and gives the same table
    assert _run("sweep", "--config", cfg, "--out", tmp_path / "a") == 0
    assert (tmp_path / "a" / "results.csv").read_bytes() == a["results.csv"]


def test_stages_chain(tmp_path, small_config):
    cfg, out = small_config(), tmp_path / "run"
    assert _run("train-reducer", "--config", cfg, "--out", out) == 0
    assert sorted(p.name for p in (out / "embeddings").glob("*.csv")) == [f"D{k}.csv" for k in range(1, 6)]
    assert _run("calibrate", "--config", cfg, "--out", out) == 0
    rows = list(csv.DictReader((out / "calibration.csv").open()))
    assert len(rows) == 2 * 2 and all(float(r["sigma"]) > 0 for r in rows)


def test_ablation_outputs(tmp_path, small_config, capsys):
    cfg, out = small_config(), tmp_path / "abl"
    assert _run("ablation", "--config", cfg, "--out", out, "--project") == 0
    rows = list(csv.DictReader((out / "ablation.csv").open()))
    assert sorted(r["variant"] for r in rows) == ["fused", "gram", "raw"]
    assert all(-1 <= float(r["silhouette"]) <= 1 for r in rows)
    proj = list(csv.DictReader((out / "projection_fused.csv").open()))
    assert len(proj) == 5 * 6 and list(proj[0]) == ["label", "x", "y"]
    assert (out / "projection_fused.svg").read_text().startswith("<svg")
    assert "fused" in capsys.readouterr().out


def test_exit_codes(tmp_path, small_config):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    assert _run("simulate", "--config", small_config(), "--out", blocker / "sub") == 2
    assert _run("sweep", "--config", small_config(detector={"R": []}), "--out", tmp_path / "r") == 1
    assert _run("simulate", "--config", tmp_path / "nope.yaml") == 1
    typo = small_config(detector={"n_replicate": 3})
    assert _run("print-config", "--config", typo) == 1
    diverge = small_config(autoencoder={"learning_rate": 1e300})
    assert _run("train-reducer", "--config", diverge, "--out", tmp_path / "d") == 3
    with pytest.raises(SystemExit) as exc:
        _run("bogus")
    assert exc.value.code == 1


def test_missing_output_dir_created(tmp_path, small_config):
    out = tmp_path / "deep" / "er"
    assert _run("simulate", "--config", small_config(), "--out", out) == 0
    assert (out / "simulate.json").exists()


def test_console_entry_point(small_config):
    proc = subprocess.run(
        [sys.executable, "-m", "outbreak_onset.cli", "print-config", "--config", str(small_config())],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 0
    assert yaml.safe_load(proc.stdout)["master_seed"] == 7
