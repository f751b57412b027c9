"""Command line: ``run``, ``sweep``, ``preset`` and ``verify``.

Exit codes: 0 success, 1 configuration error, 2 verification failure,
3 solver failure.
"""
from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

from .config import ConfigError, load_config
from .noma_solver import SolverFailure

EXIT_OK, EXIT_CONFIG, EXIT_VERIFY, EXIT_SOLVER = 0, 1, 2, 3


def _cmd_run(args) -> int:
    from .simulate import run_scenario, summary_document

    cfg = load_config(args.config)
    if args.seed is not None:
        cfg = replace(cfg, seeds=(args.seed,))
    cfg = cfg.validate()
    results = run_scenario(cfg, out_dir=args.out)
    if args.out is None and cfg.output_dir is None:
        print(json.dumps(summary_document(cfg, results), indent=2))
    else:
        print(f"wrote {Path(args.out or cfg.output_dir)}")
    return EXIT_OK


def _cmd_sweep(args) -> int:
    from .simulate import atomic_write_text
    from .sweep import ExperimentSpec, run_sweep, sweep_table

    cfg = load_config(args.config)
    seeds = tuple(range(args.seeds)) if args.seeds is not None else cfg.seeds
    values = [v.strip() for v in args.values.split(",") if v.strip()]
    spec = ExperimentSpec(cfg, args.param, tuple(values), seeds)
    results = run_sweep(spec, workers=args.workers)
    table = sweep_table(spec, results)
    if args.out:
        atomic_write_text(Path(args.out), table)
        print(f"wrote {args.out}")
    else:
        sys.stdout.write(table)
    failed = [r for r in results if r.status != "ok"]
    for r in failed:
        print(f"cell {spec.param}={r.value} seed={r.seed} failed: {r.error.splitlines()[0]}", file=sys.stderr)
    return EXIT_OK


def _cmd_preset(args) -> int:
    from .presets import PresetOptions, run_preset

    opts = PresetOptions()
    if args.horizon is not None:
        opts.horizon = args.horizon
    if args.seeds is not None:
        opts.n_seeds = args.seeds
    if args.devices is not None:
        opts.n_devices = args.devices
    opts.workers = args.workers
    out = run_preset(args.name, args.out or Path("results") / args.name, opts)
    print(f"wrote {out}")
    return EXIT_OK


def _cmd_verify(args) -> int:
    from .verify import report, run_verify

    results = run_verify(args.level)
    print(report(results))
    return EXIT_OK if all(r.passed for r in results) else EXIT_VERIFY


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="noma-offload", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="simulate one scenario")
    r.add_argument("--config", required=True, type=Path)
    r.add_argument("--seed", type=int)
    r.add_argument("--out", type=Path)
    r.set_defaults(fn=_cmd_run)

    s = sub.add_parser("sweep", help="sweep one parameter over a list of values")
    s.add_argument("--config", required=True, type=Path)
    s.add_argument("--param", required=True, help="V, T, M, scheduler, u or a dotted field name")
    s.add_argument("--values", required=True, help="comma separated")
    s.add_argument("--seeds", type=int, help="use seeds 0..K-1 instead of the config's list")
    s.add_argument("--workers", type=int, default=1)
    s.add_argument("--out", type=Path, help="CSV path (default: stdout)")
    s.set_defaults(fn=_cmd_sweep)

    pr = sub.add_parser("preset", help="run a figure preset")
    pr.add_argument("name", choices=("fig2", "fig3", "fig4", "fig5", "fig6"))
    pr.add_argument("--horizon", type=int)
    pr.add_argument("--seeds", type=int)
    pr.add_argument("--devices", type=int)
    pr.add_argument("--workers", type=int, default=1)
    pr.add_argument("--out", type=Path)
    pr.set_defaults(fn=_cmd_preset)

    v = sub.add_parser("verify", help="run the oracle suites")
    v.add_argument("--level", choices=("quick", "full"), default="quick")
    v.set_defaults(fn=_cmd_verify)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_CONFIG
    except SolverFailure as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        print(exc.dump(), file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
