"""Train the synthetic smoke classifier, attack it at two placements, print the curves."""

import argparse
import csv

from qcutadv.experiment import run_experiment, smoke_config


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="runs/smoke")
    ap.add_argument("--plots", action="store_true", help="also write an SVG (needs matplotlib)")
    args = ap.parse_args()
    cfg = smoke_config(args.out)
    cfg.plots = args.plots
    out = run_experiment(cfg, log=print)
    for path in sorted(out.glob("attack_*.csv")):
        rows = list(csv.DictReader(path.open()))
        last = rows[-1]
        print(f"{path.stem}: epochs={len(rows) - 1} strength={float(last['strength']):.3f} "
              f"misclassification={float(last['misclassification_rate']):.2f}")


if __name__ == "__main__":
    main()
