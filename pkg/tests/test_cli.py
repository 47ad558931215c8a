import json

import numpy as np
import pytest

from qcutadv import data
from qcutadv.cli import main
from qcutadv.experiment import ExperimentConfig, Scenario, default_scenarios, full_config, run_experiment, smoke_config


def test_config_round_trip():
    for cfg in (smoke_config(), full_config()):
        doc = json.loads(json.dumps(cfg.to_json()))
        assert ExperimentConfig.from_json(doc) == cfg
        assert ExperimentConfig.from_json(doc).fingerprint() == cfg.fingerprint()


def test_config_validation():
    with pytest.raises(ValueError):
        ExperimentConfig(classes=[0, 1, 2])
    with pytest.raises(ValueError):
        ExperimentConfig(dataset="CIFAR")
    with pytest.raises(ValueError):
        ExperimentConfig(dataset="MNIST", image_size=32)
    with pytest.raises(ValueError):
        ExperimentConfig(layers=2, scenarios=[Scenario("x", [(3, 1)])])


def test_default_scenarios_for_ten_layers():
    sc = {s.name: s.placements for s in default_scenarios(10, 10)}
    assert sc["input"] == [(0, 10)]
    assert [p[0] for name in ("quarter", "half", "three_quarter") for p in sc[name]] == [3, 5, 8]
    assert sc["triple"] == [(3, 10), (5, 10), (8, 10)]


def test_smoke_experiment_is_deterministic(tmp_path):
    a = run_experiment(smoke_config(str(tmp_path / "a")), log=None)
    b = run_experiment(smoke_config(str(tmp_path / "b")), log=None)
    for name in ("attack_half.csv", "attack_input.csv"):
        text = (a / name).read_text()
        assert text == (b / name).read_text()
        rows = text.strip().splitlines()[1:]
        assert rows
        for row in rows:
            strength, rate = map(float, row.split(",")[1:3])
            assert strength >= 0 and 0 <= rate <= 1
    manifest = json.loads((a / "manifest.json").read_text())
    assert manifest["config_hash"] == smoke_config(str(tmp_path / "a")).fingerprint()
    assert manifest["dataset_checksum"] == json.loads((b / "manifest.json").read_text())["dataset_checksum"]
    assert manifest["wall_time_s"] > 0


def test_idx_experiment_with_plot(tmp_path):
    rng = np.random.default_rng(0)
    root = tmp_path / "mnist"
    root.mkdir()
    for split, n in (("train", 40), ("t10k", 12)):
        labels = rng.integers(0, 2, n)
        images = np.zeros((n, 28, 28), dtype=np.uint8)
        for i, lab in enumerate(labels):
            images[i, : 14 if lab == 0 else 28, :] = 200
            images[i] += rng.integers(0, 30, (28, 28)).astype(np.uint8)
        data.write_idx_images(root / f"{split}-images-idx3-ubyte", images)
        data.write_idx_labels(root / f"{split}-labels-idx1-ubyte", labels)
    cfg = ExperimentConfig(
        dataset="MNIST",
        image_size=4,
        layers=2,
        data_dir=str(root),
        scenarios=[Scenario("input", [(0, 1)], [1, 2])],
        output_dir=str(tmp_path / "out"),
        plots=True,
    )
    cfg.train_schedule.stages = [(2, 0.1)]
    cfg.attack_schedule.stages = [(2, 0.1)]
    out = run_experiment(cfg, log=None)
    assert (out / "misclassification_vs_strength.svg").exists()
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["n_train"] == 40 and manifest["n_test"] == 12


def test_cli_cut_verify(capsys, tmp_path):
    plan = tmp_path / "plan.json"
    assert main(["cut-verify", "--scheme", "PENG_1", "--shots", "500", "--plan-out", str(plan)]) == 0
    report = json.loads(capsys.readouterr().out)
    assert report["passed"] and report["kappa"] == 4
    assert json.loads(plan.read_text())["scheme"] == "PENG_1"


def test_cli_bounds_verify(capsys):
    assert main(["bounds-verify", "--instances", "20", "--samples", "5000"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["theorem1"]["violations"] == 0
    assert out["twirl"]["max_deviation"] < 0.05


def test_cli_train_then_attack(capsys, tmp_path):
    model = tmp_path / "m.json"
    assert main(["train", "--d", "4", "--synth-samples", "64", "--layers", "2", "--stages", "2:0.1", "--out", str(model)]) == 0
    curve = tmp_path / "c.csv"
    args = ["attack", "--model", str(model), "--d", "4", "--synth-samples", "64", "--placements", "1:1", "--targets", "1,2"]
    assert main(args + ["--stages", "2:0.1", "--out", str(curve)]) == 0
    assert len(curve.read_text().splitlines()) == 4


def test_cli_ingest(capsys, tmp_path, monkeypatch):
    monkeypatch.setenv(data.CACHE_ENV, str(tmp_path))
    images = np.random.default_rng(1).integers(0, 255, (6, 28, 28)).astype(np.uint8)
    data.write_idx_images(tmp_path / "i", images)
    data.write_idx_labels(tmp_path / "l", [0, 1, 2, 1, 0, 1])
    assert main(["ingest", "--train-images", str(tmp_path / "i"), "--train-labels", str(tmp_path / "l"), "--size", "8"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["n_train"] == 5
    with np.load(out["out"]) as z:
        assert z["features"].shape == (5, 64)


def test_cli_reports_errors(capsys, tmp_path):
    bad = tmp_path / "bad"
    bad.write_bytes(b"\x00" * 20)
    assert main(["ingest", "--train-images", str(bad), "--train-labels", str(bad)]) == 2
    assert "magic" in capsys.readouterr().err


def test_cli_dump_config(capsys):
    assert main(["run", "--dump-config"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert ExperimentConfig.from_json(doc) == smoke_config()


def test_parallel_scenarios_match_sequential(tmp_path):
    a = run_experiment(smoke_config(str(tmp_path / "seq")), log=None)
    b = run_experiment(smoke_config(str(tmp_path / "par")), log=None, workers=2)
    for name in ("attack_half.csv", "attack_input.csv"):
        assert (a / name).read_text() == (b / name).read_text()
