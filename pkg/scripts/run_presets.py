#!/usr/bin/env python3
"""Run every figure preset into results/<name>/.

    python3 scripts/run_presets.py --horizon 2000 --seeds 3 --workers 4
"""
import argparse
import time
from pathlib import Path

from noma_offload.presets import PRESET_NAMES, PresetOptions, run_preset


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--horizon", type=int, default=2000)
    ap.add_argument("--seeds", type=int, default=3)
    ap.add_argument("--devices", type=int, default=32)
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--out", type=Path, default=Path("results"))
    ap.add_argument("names", nargs="*", default=list(PRESET_NAMES))
    args = ap.parse_args()
    opts = PresetOptions(args.horizon, args.seeds, args.devices, args.workers)
    for name in args.names:
        t0 = time.perf_counter()
        out = run_preset(name, args.out / name, opts)
        print(f"{name}: {out} ({time.perf_counter() - t0:.0f}s)")


if __name__ == "__main__":
    main()
