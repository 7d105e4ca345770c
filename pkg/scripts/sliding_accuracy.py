"""Sliding-window accuracy at desk scale: 1 s slices, k=30, z=8, 120 slices.

    python scripts/sliding_accuracy.py --seeds 5 [--k 30 --z 8 --slices 120] [--csv out.csv]
"""

import argparse
import json
import logging
import time

import numpy as np

from superpoint.experiments import SLIDING, run_accuracy, sliding_spec
from superpoint.pipeline import scores_csv
from superpoint.trace import generate


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seeds", type=int, default=5)
    ap.add_argument("--slices", type=int, default=120)
    ap.add_argument("--k", type=int, default=SLIDING.k)
    ap.add_argument("--z", type=int, default=SLIDING.z)
    ap.add_argument("--pairs-per-slice", type=int, default=50_000)
    ap.add_argument("--csv", help="per-window metrics of all seeds")
    args = ap.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(message)s")

    scores = []
    for seed in range(args.seeds):
        start = time.perf_counter()
        spec = sliding_spec(seed, args.slices, args.k, args.pairs_per_slice)
        run = run_accuracy(generate(spec), SLIDING.with_overrides(seed=seed, k=args.k, z=args.z))
        summary = run.summary()
        summary.update(seed=seed, seconds=round(time.perf_counter() - start, 2))
        logging.info(json.dumps(summary))
        scores += run.scores
    defined = [s for s in scores if s.defined]
    print(json.dumps({
        "windows": len(scores),
        "mean_tfr": float(np.mean([s.tfr for s in defined])),
        "mean_fnr": float(np.mean([s.fnr for s in defined])),
        "fnr_le_0.05_fraction": float(np.mean([s.fnr <= 0.05 for s in defined])),
    }, indent=2))
    if args.csv:
        with open(args.csv, "w") as fh:
            fh.write(scores_csv(scores))


if __name__ == "__main__":
    main()
