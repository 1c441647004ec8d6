#!/usr/bin/env python3
"""Run the cross-validated benchmark suite and write markdown/CSV reports.

Network access is needed for everything except the bundled diabetes set;
fetched files land in the cache directory and are reused afterwards.
"""

import argparse
from pathlib import Path

from featforge.bench import METHODS, run_benchmark, write_report


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--datasets", default="diabetes,concrete,airfoil")
    parser.add_argument("--methods", default=",".join(METHODS))
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--folds", type=int, default=5)
    parser.add_argument("--threads", type=int, default=1)
    parser.add_argument("--out", default="bench_out")
    parser.add_argument("--cache-dir", default=None)
    args = parser.parse_args()

    report = run_benchmark(
        [d for d in args.datasets.split(",") if d],
        tuple(m for m in args.methods.split(",") if m),
        seed=args.seed,
        folds=args.folds,
        threads=args.threads,
        cache_dir=Path(args.cache_dir) if args.cache_dir else None,
    )
    run_dir = write_report(report, args.out)
    print(report.to_markdown())
    print(f"written to {run_dir}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
