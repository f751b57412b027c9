"""Desk-scale experiment presets, one per results figure.

Every preset writes plain CSV/JSON under an output directory.  Nothing
time- or host-dependent is written, so reruns with the same seeds are
byte-identical.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .baselines import OFDMA_LABEL
from .config import ScenarioConfig
from .simulate import atomic_write_text, simulate
from .sweep import ExperimentSpec, aggregate, run_sweep, sweep_table

PRESET_NAMES = ("fig2", "fig3", "fig4", "fig5", "fig6")

V_VALUES = (0.1, 1.0, 5.0, 10.0, 20.0)
T_VALUES = (1, 5, 10, 20)
M_VALUES = (8, 16, 32, 64)

PROXY_NOTE = ("signalling overhead proxy: feedback_msgs counts device reports; "
              "mean_delay_slots is mean backlog over mean arrivals (Little's law)")


@dataclass
class PresetOptions:
    horizon: int = 2000
    n_seeds: int = 3
    n_devices: int = 32
    workers: int = 1

    @property
    def seeds(self):
        return tuple(range(self.n_seeds))


def _base(opts: PresetOptions, **kw) -> ScenarioConfig:
    cfg = ScenarioConfig(n_devices=opts.n_devices, horizon=opts.horizon, seeds=opts.seeds)
    return cfg.with_overrides(**kw)


def _sweep(out: Path, name: str, base: ScenarioConfig, param: str, values, opts: PresetOptions):
    spec = ExperimentSpec(base, param, tuple(values), opts.seeds)
    results = run_sweep(spec, opts.workers)
    atomic_write_text(out / f"{name}.csv", sweep_table(spec, results))
    return spec, results


def _merged(rows, header) -> str:
    lines = [",".join(header)]
    for r in rows:
        lines.append(",".join(repr(x) if isinstance(x, float) else str(x) for x in r))
    return "\n".join(lines) + "\n"


def fig2(out: Path, opts: PresetOptions):
    """Utility against device count for the proposed and OFDMA schedulers."""
    aggs = {}
    for kind in ("proposed", "ofdma"):
        base = _base(opts, scheduler_kind=kind, **{"scheduler.v_param": 20.0})
        spec, res = _sweep(out, f"fig2_{kind}", base, "M", M_VALUES, opts)
        aggs[kind] = aggregate(res, spec.values)
    rows = []
    for m in M_VALUES:
        p, o = aggs["proposed"][m]["mean_utility"], aggs["ofdma"][m]["mean_utility"]
        rows.append((m, p, o, p / o if o else float("nan")))
    atomic_write_text(out / "fig2.csv", "# " + OFDMA_LABEL + "\n" +
                      _merged(rows, ("n_devices", "utility_proposed", "utility_ofdma", "ratio")))


def fig3(out: Path, opts: PresetOptions):
    """Overhead proxy against the feedback period."""
    base = _base(opts, **{"scheduler.v_param": 20.0})
    spec, res = _sweep(out, "fig3_sweep", base, "T", T_VALUES, opts)
    agg = aggregate(res, spec.values)
    rows = [(t, agg[t]["feedback_msgs"], agg[t]["mean_delay_slots"], agg[t]["mean_utility"]) for t in T_VALUES]
    atomic_write_text(out / "fig3.csv", "# " + PROXY_NOTE + "\n" +
                      _merged(rows, ("feedback_period", "feedback_msgs", "mean_delay_slots", "mean_utility")))


def fig4(out: Path, opts: PresetOptions):
    """Utility, backlog and fairness against V for each scheduler."""
    for kind in ("proposed", "static", "ofdma"):
        _sweep(out, f"fig4_{kind}", _base(opts, scheduler_kind=kind), "V", V_VALUES, opts)
    _sweep(out, "fig4_proposed_T10", _base(opts, **{"scheduler.feedback_period": 10}), "V", V_VALUES, opts)


def fig5(out: Path, opts: PresetOptions):
    """Total backlog against time: proposed (T=1, T=10) and static."""
    series = {
        "proposed_T1": _base(opts, **{"scheduler.v_param": 20.0}),
        "proposed_T10": _base(opts, **{"scheduler.v_param": 20.0, "scheduler.feedback_period": 10}),
        "static": _base(opts, scheduler_kind="static"),
    }
    for name, cfg in series.items():
        totals = np.array([simulate(cfg, s).records.total_queue() for s in opts.seeds])
        mean = totals.mean(axis=0)
        lines = ["# " + json.dumps({"series": name, "seeds": list(opts.seeds), "config": cfg.to_dict()},
                                   sort_keys=True),
                 "slot," + ",".join(f"seed{s}" for s in opts.seeds) + ",mean_total_queue_bits"]
        for t in range(mean.size):
            lines.append(",".join([str(t)] + [repr(float(x)) for x in totals[:, t]] + [repr(float(mean[t]))]))
        atomic_write_text(out / f"fig5_{name}.csv", "\n".join(lines) + "\n")


def fig6(out: Path, opts: PresetOptions):
    """Utility against the feedback period at V=20, with the static reference."""
    _sweep(out, "fig6", _base(opts, **{"scheduler.v_param": 20.0}), "T", T_VALUES, opts)
    _sweep(out, "fig6_static", _base(opts, scheduler_kind="static"), "V", (20.0,), opts)


PRESETS = {"fig2": fig2, "fig3": fig3, "fig4": fig4, "fig5": fig5, "fig6": fig6}


def run_preset(name: str, out_dir, opts: PresetOptions | None = None) -> Path:
    if name not in PRESETS:
        raise KeyError(f"unknown preset {name!r}; choose from {', '.join(PRESET_NAMES)}")
    opts = opts or PresetOptions()
    out = Path(out_dir)
    PRESETS[name](out, opts)
    return out
