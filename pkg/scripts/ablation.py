"""Principle ablation: train the variant realizing each SN/IN/NR subset.

SN = separate per-hop transformations, IN = inceptive (parallel) hops,
NR = neighborhood relationship learning. SN without IN has no model and is
skipped. Writes ``ablation.csv``.
"""

import argparse
import csv
from pathlib import Path

from ignn import SynthConfig, TrainConfig, ablation_grid, generate_sbm, make_random_splits

SUBSETS = [(), ("IN",), ("NR",), ("IN", "NR"), ("SN", "IN"), ("SN", "IN", "NR")]


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="results")
    ap.add_argument("--K", type=int, default=4)
    ap.add_argument("--splits", type=int, default=3)
    ap.add_argument("--nodes", type=int, default=1500)
    ap.add_argument("--homophily", type=float, nargs="+", default=[0.2, 0.8])
    ap.add_argument("--max-epochs", type=int, default=200)
    args = ap.parse_args()

    tc = TrainConfig(max_epochs=args.max_epochs, patience=min(50, args.max_epochs))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "ablation.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["homophily", "principles", "variant", "mean_acc", "std_acc"])
        for h in args.homophily:
            bundle = generate_sbm(SynthConfig(args.nodes, 4, 10, h, feature_dim=16, seed=0))
            splits = make_random_splits(bundle.num_nodes, 0, args.splits, bundle.labels.labels)
            for principles, kind, mean, std in ablation_grid(bundle, splits, SUBSETS, args.K, tc):
                label = "+".join(principles) or "none"
                print(f"h={h:.1f}  {label:10s} {kind:12s} {mean:.3f} ± {std:.3f}")
                w.writerow([h, label, kind, f"{mean:.4f}", f"{std:.4f}"])


if __name__ == "__main__":
    main()
