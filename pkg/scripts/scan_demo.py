#!/usr/bin/env python3
"""Compare certified and empirical throughput on the symmetric uniform-fault network.

Prints the certified interval from the analytic machinery, then probes a
demand grid with the simulator and reports the empirical transition window.
The certified-stable range should sit inside the empirically-stable range.
"""

import argparse

import numpy as np

from faultroute import NetworkParams, SimConfig, throughput_bounds, throughput_scan

ONES = np.ones((4, 4)) - np.eye(4)
UNIFORM = np.full(4, 0.25)


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--horizon", type=float, default=1000.0)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--replications", type=int, default=3)
    args = parser.parse_args()

    params = NetworkParams(F1=0.5, F2=0.5, beta=1.0, eta=0.0)
    tb = throughput_bounds(params, UNIFORM)
    print(f"certified: stable below {tb.lower:.4f}, unstable above {tb.upper:.4f}")

    cfg = SimConfig(horizon=args.horizon, step=0.01, seed=args.seed)
    grid = [0.3, 0.5, 0.66, 0.8, 0.95, 1.05]
    result = throughput_scan(params, ONES, cfg, grid, replications=args.replications)
    for eta, probe in zip(result.etas, result.probes):
        print(
            f"  eta={eta:5.2f}  {probe.verdict:22s} diverged={probe.n_diverged}  "
            f"avg-slope={probe.median_avg_slope:9.2e}  growth={probe.median_growth_slope:8.4f}"
        )
    print(f"empirical window: last stable {result.largest_stable}, first unstable {result.smallest_unstable}")


if __name__ == "__main__":
    main()
