"""Detection probability of the rough estimator against a simulation.

    python scripts/calibration_table.py [--theta 1024 --g 8] [--trials 20000]
"""

import argparse

from superpoint.estimators import DEFAULT_RHO, compute_tau, weight_threshold
from superpoint.experiments import simulate_detection_rate
from superpoint.probmodel import pr_weight_at_least


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--theta", type=int, default=1024)
    ap.add_argument("--g", type=int, default=8)
    ap.add_argument("--rho", type=float, default=DEFAULT_RHO)
    ap.add_argument("--trials", type=int, default=20_000)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--n", type=int, nargs="+",
                    default=[128, 256, 384, 512, 768, 1024, 1536, 2048, 3072, 4096])
    args = ap.parse_args()
    tau = compute_tau(args.theta, args.g)
    w = weight_threshold(args.rho, args.g)
    print(f"# theta={args.theta} g={args.g} tau={tau} w={w} trials={args.trials}")
    print("n,model,simulated,z_score")
    for n in args.n:
        p = pr_weight_at_least(n, args.g, tau, w)
        rate = simulate_detection_rate(n, args.g, tau, w, args.trials, args.seed)
        se = (p * (1 - p) / args.trials) ** 0.5
        z = (rate - p) / se if se > 0 else 0.0
        print(f"{n},{p:.6f},{rate:.6f},{z:+.2f}", flush=True)


if __name__ == "__main__":
    main()
