"""Binary MNIST (0 vs 1), 16x16, ten layers: clean accuracy and all attack placements.

Long-running. Expects the four IDX files under ``$QCUTADV_DATA/mnist`` or
``--data-dir``. Prints one line per placement with the final attack metrics.
"""

import argparse
import csv
import json

from qcutadv.experiment import full_config, run_experiment


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--data-dir")
    ap.add_argument("--out", default="runs/mnist_l10")
    ap.add_argument("--max-train", type=int, help="subsample the training split for a quicker pass")
    args = ap.parse_args()
    cfg = full_config(args.out, args.data_dir)
    cfg.max_train = args.max_train
    out = run_experiment(cfg, log=print)
    manifest = json.loads((out / "manifest.json").read_text())
    print(f"clean test accuracy: {manifest['clean_test_accuracy']:.4f}")
    print(f"{'placement':<16}{'strength':>10}{'misclass':>10}")
    for sc in cfg.scenarios:
        rows = list(csv.DictReader((out / f"attack_{sc.name}.csv").open()))
        print(f"{sc.name:<16}{float(rows[-1]['strength']):>10.3f}{float(rows[-1]['misclassification_rate']):>10.3f}")


if __name__ == "__main__":
    main()
