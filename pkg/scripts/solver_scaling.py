#!/usr/bin/env python3
"""Median power-solver wall time against the number of active devices."""
import argparse

from noma_offload.verify import solve_time_scaling


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--sizes", default="8,16,32,64,128,256,512")
    ap.add_argument("--reps", type=int, default=15)
    args = ap.parse_args()
    sizes = tuple(int(s) for s in args.sizes.split(","))
    slope, med = solve_time_scaling(sizes, args.reps)
    for k, m in zip(sizes, med):
        print(f"M={k:>4}  median {m * 1e3:8.3f} ms")
    print(f"log-log slope {slope:.2f}")


if __name__ == "__main__":
    main()
