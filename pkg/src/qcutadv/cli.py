"""Command line entry point: ``python -m qcutadv <subcommand>``.

Qubits are reported 1-based on the command line and stored 0-based inside.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import bounds, data, wirecut
from .adversary import AttackConfig, insert_blocks, train_attack, write_curve_csv
from .circuit import from_text, random_circuit, simulate, zero_state
from .classifier import ClassifierModel, LabeledDataset, Schedule, accuracy, load_model, save_model, train
from .experiment import ExperimentConfig, full_config, run_experiment, smoke_config
from .qmath import rng_for


def _stages(text: str) -> list[tuple[int, float]]:
    """``"10:0.05,10:0.01"`` -> ``[(10, 0.05), (10, 0.01)]``."""
    out = []
    for part in text.split(","):
        epochs, lr = part.split(":")
        out.append((int(epochs), float(lr)))
    return out


def _qubits(text: str | None):
    if text is None or text == "all":
        return None
    return tuple(int(q) - 1 for q in text.split(","))


def _save_npz(path, ds: LabeledDataset):
    np.savez_compressed(path, features=ds.features, labels=ds.labels, split=ds.split)


def _load_npz(path) -> LabeledDataset:
    with np.load(path) as z:
        return LabeledDataset(z["features"], z["labels"], z["split"])


def _dataset(args) -> LabeledDataset:
    if args.data == "synth":
        return data.make_synthetic(args.synth_samples, 2**args.d, args.classes, args.seed)
    return _load_npz(args.data)


def cmd_ingest(args):
    tr = data.image_dataset(*data.ingest_idx(args.train_images, args.train_labels), args.digits, args.size, "train")
    parts = [tr]
    if args.test_images:
        parts.append(data.image_dataset(*data.ingest_idx(args.test_images, args.test_labels), args.digits, args.size, "test"))
    ds = data.concat(*parts)
    out = Path(args.out) if args.out else data.data_dir() / f"dataset_{'-'.join(map(str, args.digits))}_{args.size}.npz"
    out.parent.mkdir(parents=True, exist_ok=True)
    _save_npz(out, ds)
    print(json.dumps({"out": str(out), "n_train": len(ds.train()), "n_test": len(ds.test()), "checksum": data.dataset_checksum(ds)}))


def cmd_train(args):
    ds = _dataset(args)
    d = int(np.ceil(np.log2(ds.features.shape[1])))
    k = int(ds.labels.max()) + 1
    k = 1 << max(1, (k - 1).bit_length())
    model = ClassifierModel.initialise(d, k, args.layers, args.seed)
    sched = Schedule(args.optimizer, _stages(args.stages), args.batch_size, args.seed)
    model, metrics = train(model, ds, sched, log=(lambda r: print(json.dumps(r))) if args.verbose else None)
    save_model(args.out, model, sched, args.seed)
    print(json.dumps(metrics[-1]))


def cmd_attack(args):
    model = load_model(args.model)
    ds = _dataset(args)
    placements = [tuple(int(x) for x in p.split(":")) for p in args.placements.split(",")]
    cfg = AttackConfig(
        placements,
        _qubits(args.targets),
        args.gamma,
        args.penalty,
        args.objective_sign,
        not args.input_block_data_only,
        Schedule("sgd", _stages(args.stages), args.batch_size, args.seed),
    )
    _, curve = train_attack(insert_blocks(model, cfg), ds, cfg)
    write_curve_csv(args.out, curve)
    print(json.dumps(curve[-1]))


def cmd_cut_verify(args):
    scheme = wirecut.Scheme(args.scheme)
    if args.circuit:
        circ = from_text(Path(args.circuit).read_text())
    else:
        circ = random_circuit(args.width, args.gates, rng_for(args.seed))
    cuts = [tuple(int(x) for x in c.split(":")) for c in args.cuts.split(",")]
    cuts = [(pos, q - 1) for pos, q in cuts]
    plan = wirecut.cut_circuit(circ, cuts, scheme)
    obs = np.diag([(-1.0) ** bin(i).count("1") for i in range(2**circ.width)])
    state = zero_state(circ.width)
    exact = wirecut.recombine_exact(plan, state, obs)
    uncut = float(np.real(np.vdot(simulate(circ, state), obs @ simulate(circ, state))))
    report = {
        "scheme": scheme.value,
        "m": plan.m,
        "kappa": plan.kappa,
        "terms": len(plan.terms),
        "uncut": uncut,
        "recombined": exact,
        "abs_error": abs(exact - uncut),
        "passed": abs(exact - uncut) < 1e-10,
    }
    if args.shots:
        mean, err = wirecut.recombine_sampled(plan, state, obs, args.shots, args.seed)
        report.update(sampled=mean, sampled_stderr=err)
    if args.plan_out:
        Path(args.plan_out).write_text(wirecut.dumps_plan(plan))
    print(json.dumps(report, indent=1))
    return 0 if report["passed"] else 1


def cmd_bounds_verify(args):
    suites = {}
    if args.suite in ("theorem1", "all"):
        suites["theorem1"] = bounds.theorem1_suite(args.d, args.max_gates, args.instances, args.seed)
    if args.suite in ("theorem2", "all"):
        cfg = bounds.Theorem2Suite(d=args.d, n_samples=args.samples, delta=args.delta, seed=args.seed)
        suites["theorem2"] = bounds.theorem2_suite(cfg)
    if args.suite in ("twirl", "all"):
        suites["twirl"] = {"d": args.d, "n_samples": args.samples, "max_deviation": bounds.twirl_check(min(args.d, 3), args.samples, args.seed)}
    print(json.dumps(suites, indent=1, default=float))


def cmd_run(args):
    if args.config:
        cfg = ExperimentConfig.from_json(json.loads(Path(args.config).read_text()))
    elif args.full:
        cfg = full_config(data_dir=args.data_dir)
    else:
        cfg = smoke_config()
    if args.out:
        cfg.output_dir = args.out
    if args.dump_config:
        print(json.dumps(cfg.to_json(), indent=1))
        return
    out = run_experiment(cfg, log=(lambda r: print(json.dumps(r, default=float))) if args.verbose else None, workers=args.workers)
    print(json.dumps({"output_dir": str(out)}))


def _add_data_args(p):
    p.add_argument("--data", default="synth", help="'synth' or an .npz written by 'ingest'")
    p.add_argument("--d", type=int, default=6, help="data qubits for the synthetic set")
    p.add_argument("--classes", type=int, default=2)
    p.add_argument("--synth-samples", type=int, default=200)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--batch-size", type=int, default=32)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="qcutadv")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="parse IDX files into a resized .npz dataset")
    p.add_argument("--train-images", required=True)
    p.add_argument("--train-labels", required=True)
    p.add_argument("--test-images")
    p.add_argument("--test-labels")
    p.add_argument("--digits", type=int, nargs="+", default=[0, 1])
    p.add_argument("--size", type=int, default=16)
    p.add_argument("--out")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("train", help="train a clean classifier")
    _add_data_args(p)
    p.add_argument("--layers", type=int, default=5)
    p.add_argument("--optimizer", choices=["adam", "sgd"], default="adam")
    p.add_argument("--stages", default="20:0.1")
    p.add_argument("--out", required=True)
    p.add_argument("--verbose", action="store_true")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("attack", help="train adversarial blocks against a frozen classifier")
    _add_data_args(p)
    p.add_argument("--model", required=True)
    p.add_argument("--placements", default="0:1", help="comma list of boundary:depth")
    p.add_argument("--targets", default="all", help="'all' or 1-based qubits, e.g. 3,4,5")
    p.add_argument("--gamma", type=float, default=0.0)
    p.add_argument("--penalty", choices=["theta_l2", "hs"], default="theta_l2")
    p.add_argument("--objective-sign", choices=["limit", "literal"], default="limit")
    p.add_argument("--input-block-data-only", action="store_true")
    p.add_argument("--stages", default="30:0.1")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_attack)

    p = sub.add_parser("cut-verify", help="cut a circuit and compare recombination with direct simulation")
    p.add_argument("--circuit", help="circuit text file; random if omitted")
    p.add_argument("--width", type=int, default=3)
    p.add_argument("--gates", type=int, default=12)
    p.add_argument("--cuts", default="6:2", help="comma list of position:qubit (1-based qubit)")
    p.add_argument("--scheme", choices=[s.value for s in wirecut.Scheme], default=wirecut.Scheme.HARADA_MUB.value)
    p.add_argument("--shots", type=int, default=0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--plan-out")
    p.set_defaults(func=cmd_cut_verify)

    p = sub.add_parser("bounds-verify", help="randomised checks of the robustness bounds")
    p.add_argument("--suite", choices=["theorem1", "theorem2", "twirl", "all"], default="all")
    p.add_argument("--d", type=int, default=2)
    p.add_argument("--max-gates", type=int, default=3)
    p.add_argument("--instances", type=int, default=1000)
    p.add_argument("--samples", type=int, default=100_000)
    p.add_argument("--delta", type=float, default=0.15)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_bounds_verify)

    p = sub.add_parser("run", help="train then attack across scenarios from a JSON config")
    p.add_argument("--config")
    p.add_argument("--full", action="store_true", help="binary MNIST, ten layers (long-running)")
    p.add_argument("--data-dir")
    p.add_argument("--out")
    p.add_argument("--dump-config", action="store_true")
    p.add_argument("--workers", type=int, default=1, help="run scenarios in this many processes")
    p.add_argument("--verbose", action="store_true")
    p.set_defaults(func=cmd_run)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        rc = args.func(args)
    except (ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return rc or 0
