#!/usr/bin/env python3
"""Print mean utility and backlog against V for one scheduler, with standard errors."""
import argparse

from noma_offload.config import ScenarioConfig
from noma_offload.sweep import ExperimentSpec, aggregate, run_sweep


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--scheduler", default="proposed", choices=("proposed", "static", "ofdma"))
    ap.add_argument("--devices", type=int, default=32)
    ap.add_argument("--horizon", type=int, default=3000)
    ap.add_argument("--seeds", type=int, default=3)
    ap.add_argument("--period", type=int, default=1, help="feedback period T")
    ap.add_argument("--values", default="0.1,1,5,10,20")
    ap.add_argument("--workers", type=int, default=1)
    args = ap.parse_args()

    base = ScenarioConfig(n_devices=args.devices, horizon=args.horizon, scheduler_kind=args.scheduler)
    base = base.with_overrides(**{"scheduler.feedback_period": args.period})
    spec = ExperimentSpec(base, "V", tuple(args.values.split(",")), tuple(range(args.seeds)))
    agg = aggregate(run_sweep(spec, args.workers), spec.values)
    print(f"{'V':>6} {'utility':>10} {'se':>7} {'backlog (Mbit)':>15} {'jain':>6} {'slope':>10}")
    for v in spec.values:
        a = agg[v]
        print(f"{v:>6g} {a['mean_utility']:>10.2f} {a['mean_utility_se']:>7.2f} "
              f"{a['mean_total_queue_bits'] / 1e6:>15.3f} {a['jain_index']:>6.3f} {a['stability_slope']:>10.2e}")


if __name__ == "__main__":
    main()
