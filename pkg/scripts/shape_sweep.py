#!/usr/bin/env python3
"""Gaussian width sweep for the noisy oscillator study over several seeds.

Prints the median and 95th percentile error for each width, which is how
the default width of the benchmark was chosen.
"""

import argparse

import numpy as np

from soldmd.bench import Experiment1Config, experiment1


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--shapes", default="1,2,4,8,16,24,32,48")
    p.add_argument("--seeds", type=int, default=10)
    p.add_argument("--trials", type=int, default=100)
    args = p.parse_args()

    print(f"{'shape':>8} {'worst median':>13} {'worst p95':>10} {'failed fits':>12}")
    for shape in (float(s) for s in args.shapes.split(",")):
        medians, p95s, failed = [], [], 0
        for seed in range(args.seeds):
            try:
                s = experiment1(Experiment1Config(trials=args.trials, seed=seed, shape=shape)).summary
            except ArithmeticError:
                failed += 1
                continue
            medians.append(s["median"])
            p95s.append(s["p95"])
        worst_m = max(medians) if medians else np.nan
        worst_p = max(p95s) if p95s else np.nan
        print(f"{shape:8.2f} {worst_m:13.4f} {worst_p:10.4f} {failed:12d}")


if __name__ == "__main__":
    main()
