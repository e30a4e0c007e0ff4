#!/usr/bin/env python3
"""Run the full four-condition protocol and print the summary table.

Equivalent to `tactorsim run-trials` but prints the per-case breakdown,
handy when tuning operator or physics constants.
"""

import argparse
import time

from tactorsim.trials import CONDITIONS, aggregate, run_protocol


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    t0 = time.perf_counter()
    results = run_protocol(args.seed)
    wall = time.perf_counter() - t0
    summary = aggregate(results)

    print(f"{len(results)} trials in {wall:.1f} s wall")
    print(f"{'condition':<10} {'success':>8} {'mean t':>7} {'mean |e|':>9}")
    for cond in CONDITIONS:
        s = summary["by_condition"][cond.label]
        print(f"{cond.label:<10} {s.successes:>4}/{s.n:<3} "
              f"{s.mean_time_s:>6.2f}s {s.mean_abs_error_deg:>8.2f}°")
    print()
    print(f"{'case':<12} {'success':>8} {'mean |e|':>9}")
    for case, s in summary["by_case"].items():
        print(f"{case:<12} {s.successes:>4}/{s.n:<3} {s.mean_abs_error_deg:>8.2f}°")


if __name__ == "__main__":
    main()
