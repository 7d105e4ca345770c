"""Union estimate with and without the contamination correction, across v.

Median relative error over true super points whose union estimate is not
saturated (saturation happens at the same weight for both estimates).

    python scripts/correction_comparison.py --seeds 5 --v 1024 4096 65536
"""

import argparse

from superpoint.experiments import DISCRETE, discrete_spec, median, run_accuracy
from superpoint.trace import generate


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seeds", type=int, default=5)
    ap.add_argument("--v", type=int, nargs="+", default=[1024, 4096, 65536])
    args = ap.parse_args()

    traces = {seed: generate(discrete_spec(seed)) for seed in range(args.seeds)}
    print("v,seed,estimable,saturated,median_raw,median_corrected")
    for v in args.v:
        for seed, trace in traces.items():
            run = run_accuracy(trace, DISCRETE.with_overrides(seed=seed, v=v), compare_correction=True)
            raw, cor = run.estimable_errors()
            print(f"{v},{seed},{len(raw)},{len(run.raw_errors) - len(raw)},"
                  f"{median(raw):.5f},{median(cor):.5f}", flush=True)


if __name__ == "__main__":
    main()
