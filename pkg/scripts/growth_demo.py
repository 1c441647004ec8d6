#!/usr/bin/env python3
"""Show how the feature pool grows with construction steps.

Three dimensionless inputs, three step settings, wall time per pool.
"""

import argparse
import time

import numpy as np

from featforge.synthesis import EngineeringConfig, engineer


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--inputs", type=int, default=3)
    parser.add_argument("--rows", type=int, default=500)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    rng = np.random.default_rng(args.seed)
    columns = {f"x{i}": rng.uniform(0.5, 3.0, args.rows) for i in range(1, args.inputs + 1)}
    kinds = {c: "numeric" for c in columns}
    units = {c: None for c in columns}

    for steps in (1, 2, 3):
        t0 = time.perf_counter()
        pool = engineer(columns, kinds, units, EngineeringConfig(steps=steps), seed=args.seed)
        dt = time.perf_counter() - t0
        print(f"steps={steps}: {len(pool):>6} features in {dt:6.2f}s")
        print(pool.report.to_text())
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
