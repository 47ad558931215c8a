"""Experiment configuration and the train-then-attack pipeline."""
from __future__ import annotations

import hashlib
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import data
from .adversary import TARGET_PRESETS, AttackConfig, insert_blocks, preset_boundaries, train_attack, write_curve_csv
from .classifier import ClassifierModel, LabeledDataset, Schedule, accuracy, load_model, save_model, train

DATASETS = ("SYNTH", "MNIST", "FMNIST")
IDX_FILES = {
    "train_images": "train-images-idx3-ubyte",
    "train_labels": "train-labels-idx1-ubyte",
    "test_images": "t10k-images-idx3-ubyte",
    "test_labels": "t10k-labels-idx1-ubyte",
}


@dataclass
class Scenario:
    name: str
    placements: list[tuple[int, int]]
    targets: str | list[int] = "all"

    def target_qubits(self):
        if isinstance(self.targets, str):
            return TARGET_PRESETS[self.targets]
        return tuple(self.targets)


@dataclass
class ExperimentConfig:
    dataset: str = "SYNTH"
    classes: list[int] = field(default_factory=lambda: [0, 1])
    image_size: int = 8
    layers: int = 5
    data_dir: str | None = None
    max_train: int | None = None
    max_test: int | None = None
    synth_samples: int = 200
    train_schedule: Schedule = field(default_factory=lambda: Schedule("adam", [(20, 0.1)], 64, 0))
    attack_schedule: Schedule = field(default_factory=lambda: Schedule("sgd", [(30, 0.1)], 32, 0))
    scenarios: list[Scenario] = field(default_factory=list)
    gamma: float = 0.0
    penalty: str = "theta_l2"
    objective_sign: str = "limit"
    input_block_ancillas: bool = True
    model_seed: int = 0
    data_seed: int = 0
    output_dir: str = "runs/smoke"
    plots: bool = False
    checkpoint: str | None = None

    def __post_init__(self):
        if self.dataset not in DATASETS:
            raise ValueError(f"dataset must be one of {DATASETS}")
        k = len(self.classes)
        if k < 2 or k & (k - 1):
            raise ValueError(f"class count {k} must be a power of two >= 2")
        if self.dataset != "SYNTH" and self.image_size > 28:
            raise ValueError("image size cannot exceed the native 28 pixels")
        if self.image_size < 2 or self.image_size & (self.image_size - 1):
            raise ValueError("image size must be a power of two")
        if isinstance(self.train_schedule, dict):
            self.train_schedule = _schedule(self.train_schedule)
        if isinstance(self.attack_schedule, dict):
            self.attack_schedule = _schedule(self.attack_schedule)
        self.scenarios = [
            Scenario(s.name, [tuple(p) for p in s.placements], s.targets)
            if isinstance(s, Scenario)
            else Scenario(s["name"], [tuple(p) for p in s["placements"]], s.get("targets", "all"))
            for s in self.scenarios
        ]
        for s in self.scenarios:
            for q, _ in s.placements:
                if not 0 <= q <= self.layers:
                    raise ValueError(f"scenario {s.name}: boundary {q} outside [0, {self.layers}]")

    @property
    def d(self) -> int:
        return 2 * int(math.log2(self.image_size))

    def to_json(self) -> dict:
        doc = asdict(self)
        doc["scenarios"] = [{**asdict(s), "placements": [list(p) for p in s.placements]} for s in self.scenarios]
        for key in ("train_schedule", "attack_schedule"):
            doc[key]["stages"] = [list(st) for st in doc[key]["stages"]]
        return doc

    @classmethod
    def from_json(cls, doc: dict) -> ExperimentConfig:
        return cls(**doc)

    def fingerprint(self) -> str:
        return hashlib.sha256(json.dumps(self.to_json(), sort_keys=True).encode()).hexdigest()


def _schedule(doc: dict) -> Schedule:
    return Schedule(doc["optimizer"], [tuple(s) for s in doc["stages"]], doc["batch_size"], doc["seed"])


def default_scenarios(layers: int, depth: int) -> list[Scenario]:
    """Single blocks at the input and at quarter, half and three-quarter depth, plus all three together."""
    pre = preset_boundaries(layers)
    out = [Scenario(name, [(q, depth)]) for name in ("input", "quarter", "half", "three_quarter") for q in pre[name]]
    out.append(Scenario("triple", [(q, depth) for q in pre["triple"]]))
    return out


def smoke_config(output_dir: str = "runs/smoke") -> ExperimentConfig:
    return ExperimentConfig(
        scenarios=[Scenario("half", [(3, 2)]), Scenario("input", [(0, 2)])],
        attack_schedule=Schedule("sgd", [(10, 0.5)], 32, 0),
        output_dir=output_dir,
    )


def full_config(output_dir: str = "runs/mnist_l10", data_dir: str | None = None) -> ExperimentConfig:
    """Binary MNIST (digits 0 and 1) at 16x16 with ten layers; long-running."""
    return ExperimentConfig(
        dataset="MNIST",
        classes=[0, 1],
        image_size=16,
        layers=10,
        data_dir=data_dir,
        train_schedule=Schedule("adam", [(10, 0.05), (10, 0.01), (10, 0.005)], 256, 0),
        attack_schedule=Schedule("sgd", [(20, 0.1)], 256, 0),
        scenarios=default_scenarios(10, 10),
        gamma=3.0,
        output_dir=output_dir,
        plots=True,
    )


def load_dataset(cfg: ExperimentConfig) -> LabeledDataset:
    if cfg.dataset == "SYNTH":
        ds = data.make_synthetic(cfg.synth_samples, cfg.image_size**2, len(cfg.classes), cfg.data_seed)
    else:
        root = Path(cfg.data_dir) if cfg.data_dir else data.data_dir() / cfg.dataset.lower()
        paths = {k: _find(root, v) for k, v in IDX_FILES.items()}
        tr = data.image_dataset(*data.ingest_idx(paths["train_images"], paths["train_labels"]), cfg.classes, cfg.image_size, "train")
        te = data.image_dataset(*data.ingest_idx(paths["test_images"], paths["test_labels"]), cfg.classes, cfg.image_size, "test")
        ds = data.concat(_cap(tr, cfg.max_train, cfg.data_seed), _cap(te, cfg.max_test, cfg.data_seed))
    return ds


def _find(root: Path, stem: str) -> Path:
    for cand in (root / stem, root / (stem + ".gz"), root / stem.replace("-idx", ".idx")):
        if cand.exists():
            return cand
    raise FileNotFoundError(f"{stem} not found under {root}")


def _cap(ds: LabeledDataset, limit: int | None, seed: int) -> LabeledDataset:
    if limit is None or len(ds) <= limit:
        return ds
    keep = np.sort(np.random.default_rng(seed).permutation(len(ds))[:limit])
    return LabeledDataset(ds.features[keep], ds.labels[keep], ds.split[keep])


def _plot(curves: dict[str, list[dict]], path: Path):
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(5, 3.5))
    for name, curve in curves.items():
        ax.plot([r["strength"] for r in curve], [r["misclassification_rate"] for r in curve], marker=".", label=name)
    ax.set_xlabel("attack strength")
    ax.set_ylabel("misclassification rate")
    ax.set_ylim(-0.02, 1.02)
    ax.legend(fontsize=7)
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def _run_scenario(job) -> list[dict]:
    model, ds, cfg, sc = job
    acfg = AttackConfig(
        sc.placements,
        sc.target_qubits(),
        cfg.gamma,
        cfg.penalty,
        cfg.objective_sign,
        cfg.input_block_ancillas,
        cfg.attack_schedule,
    )
    try:
        return train_attack(insert_blocks(model, acfg), ds, acfg)[1]
    except Exception as exc:
        raise RuntimeError(f"scenario {sc.name!r} failed: {exc}") from exc


def run_experiment(cfg: ExperimentConfig, log=print, workers: int = 1) -> Path:
    """Train (or load) the classifier, run every scenario, and write CSVs plus a manifest.

    With ``workers > 1`` scenarios run in separate processes. Each scenario
    seeds itself from the attack schedule, so the outputs do not depend on
    the worker count.
    """
    start = time.perf_counter()
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    ds = load_dataset(cfg)
    k = len(cfg.classes)
    if cfg.checkpoint:
        model = load_model(cfg.checkpoint)
        train_metrics = []
    else:
        model = ClassifierModel.initialise(cfg.d, k, cfg.layers, cfg.model_seed)
        model, train_metrics = train(model, ds, cfg.train_schedule, log=log)
    save_model(out / "model.json", model, cfg.train_schedule, cfg.model_seed)
    test = ds.test() if len(ds.test()) else ds.train()
    curves = {}
    jobs = [(model, ds, cfg, sc) for sc in cfg.scenarios]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_scenario, jobs))
    else:
        results = map(_run_scenario, jobs)
    for sc, curve in zip(cfg.scenarios, results):
        write_curve_csv(out / f"attack_{sc.name}.csv", curve)
        curves[sc.name] = curve
        if log:
            log({"scenario": sc.name, "final": curve[-1]})
    if cfg.plots and curves:
        _plot(curves, out / "misclassification_vs_strength.svg")
    manifest = {
        "config": cfg.to_json(),
        "config_hash": cfg.fingerprint(),
        "seeds": {
            "model": cfg.model_seed,
            "data": cfg.data_seed,
            "train": cfg.train_schedule.seed,
            "attack": cfg.attack_schedule.seed,
        },
        "dataset_checksum": data.dataset_checksum(ds),
        "downsampling": "bilinear, pixel-centre aligned",
        "n_train": len(ds.train()),
        "n_test": len(ds.test()),
        "clean_test_accuracy": accuracy(model, test.features, test.labels),
        "train_metrics": train_metrics,
        "scenarios": [s.name for s in cfg.scenarios],
        "wall_time_s": time.perf_counter() - start,
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=1))
    return out
