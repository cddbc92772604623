"""Accuracy against depth for vanilla GCN and c-IGNN on a heterophilous block model.

Deep GCN collapses toward chance while c-IGNN holds its accuracy as K grows.
Writes ``dilemma.csv`` with one row per (model, depth).

    python3 scripts/dilemma.py --out results/ --hops 2,4,8,32 --splits 5
"""

import argparse
import csv
import time
from pathlib import Path

from ignn import ModelFamily, SynthConfig, TrainConfig, generate_sbm, hop_sweep, make_random_splits


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="results")
    ap.add_argument("--hops", default="2,4,8,32")
    ap.add_argument("--splits", type=int, default=5)
    ap.add_argument("--homophily", type=float, default=0.2)
    ap.add_argument("--max-epochs", type=int, default=300)
    ap.add_argument("--patience", type=int, default=50)
    ap.add_argument("--workers", type=int, default=1)
    args = ap.parse_args()

    bundle = generate_sbm(SynthConfig(3000, 4, 10, args.homophily, feature_dim=16, seed=0))
    splits = make_random_splits(bundle.num_nodes, 0, args.splits, bundle.labels.labels)
    tc = TrainConfig(max_epochs=args.max_epochs, patience=min(args.patience, args.max_epochs))
    hops = [int(h) for h in args.hops.split(",")]

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rows = []
    for kind in ("gcn", "c-ignn"):
        t0 = time.perf_counter()
        for k, mean, std in hop_sweep(ModelFamily(kind, 64), bundle, splits, hops, tc, workers=args.workers):
            rows.append((kind, k, mean, std))
            print(f"{kind:7s} K={k:3d}  acc {mean:.3f} ± {std:.3f}")
        print(f"  ({time.perf_counter() - t0:.0f}s)")
    with open(out / "dilemma.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["model", "K", "mean_acc", "std_acc"])
        w.writerows(rows)


if __name__ == "__main__":
    main()
