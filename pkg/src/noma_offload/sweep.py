"""Parameter sweeps: independent (value, seed) cells merged in a fixed order."""
from __future__ import annotations

import csv
import io
import json
import math
import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, fields

import numpy as np

from .config import ConfigError, EnvConfig, ScenarioConfig, SchedulerConfig
from .simulate import simulate

# short names accepted on the command line
PARAM_ALIASES = {
    "V": "scheduler.v_param",
    "T": "scheduler.feedback_period",
    "M": "n_devices",
    "scheduler": "scheduler_kind",
    "u": "scheduler.rate_unit_scale",
}

METRICS = ("mean_utility", "mean_total_queue_bits", "final_total_queue_bits", "mean_q_p", "jain_index",
           "stability_slope", "power_violation_w", "knowledge_gap_max_ratio", "backoff_count",
           "feedback_msgs", "mean_delay_slots")

SWEEP_COLUMNS = ("row", "param", "value", "seed", "status") + METRICS + tuple(m + "_se" for m in METRICS)


def resolve_param(name: str) -> str:
    """Map an alias or dotted name to a dotted config field; raises ConfigError if unknown."""
    full = PARAM_ALIASES.get(name, name)
    if full.startswith("scheduler."):
        ok = full.split(".", 1)[1] in {f.name for f in fields(SchedulerConfig)}
    elif full.startswith("env."):
        ok = full.split(".", 1)[1] in {f.name for f in fields(EnvConfig)}
    else:
        ok = full in {f.name for f in fields(ScenarioConfig)} and full not in ("scheduler", "env", "seeds")
    if not ok:
        raise ConfigError([f"unknown sweep parameter {name!r}"])
    return full


def coerce_value(full: str, raw):
    """Parse a command-line value into the type of the target field."""
    if full == "scheduler_kind" or not isinstance(raw, str):
        return raw
    if full in ("n_devices", "horizon", "scheduler.feedback_period", "env.weight_max"):
        return int(raw)
    if full in ("scheduler.log_base", "scheduler.ofdma_noise", "env.fading"):
        return raw
    return float(raw)


@dataclass(frozen=True)
class ExperimentSpec:
    base: ScenarioConfig
    param: str
    values: tuple
    seeds: tuple = (0,)
    label: str = ""

    def __post_init__(self):
        full = resolve_param(self.param)
        object.__setattr__(self, "param", full)
        object.__setattr__(self, "values", tuple(coerce_value(full, v) for v in self.values))
        object.__setattr__(self, "seeds", tuple(int(s) for s in self.seeds))
        probs = []
        for v in self.values:
            probs += [f"{full}={v!r}: {p}" for p in self.cell_config(v).problems()]
        if not self.values:
            probs.append("a sweep needs at least one value")
        if probs:
            raise ConfigError(probs)

    def cell_config(self, value) -> ScenarioConfig:
        return self.base.with_overrides(**{self.param: value})

    def cells(self):
        return [(v, s) for v in self.values for s in self.seeds]


@dataclass
class CellResult:
    value: object
    seed: int
    status: str
    summary: dict | None
    error: str = ""


def run_cell(args) -> CellResult:
    cfg, value, seed = args
    try:
        res = simulate(cfg, seed)
        return CellResult(value, seed, "ok", res.summary.to_dict() if res.summary else None)
    except Exception as exc:  # a failed cell is reported, not fatal
        return CellResult(value, seed, "failed", None, f"{type(exc).__name__}: {exc}\n{traceback.format_exc()}")


def run_sweep(spec: ExperimentSpec, workers: int = 1) -> list[CellResult]:
    """Run every cell; results come back in (value, seed) order regardless of ``workers``."""
    jobs = [(spec.cell_config(v), v, s) for v, s in spec.cells()]
    if workers <= 1:
        return [run_cell(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(run_cell, jobs))


def aggregate(results: list[CellResult], values) -> dict:
    """Per-value (mean, standard error) of each metric over successful cells."""
    out = {}
    for v in values:
        ok = [r.summary for r in results if r.value == v and r.status == "ok" and r.summary]
        agg = {"n": len(ok)}
        for m in METRICS:
            x = np.array([s[m] for s in ok], dtype=float)
            agg[m] = float(x.mean()) if x.size else math.nan
            agg[m + "_se"] = float(x.std(ddof=1) / math.sqrt(x.size)) if x.size > 1 else 0.0 if x.size else math.nan
        out[v] = agg
    return out


def _cell(x) -> str:
    if x is None:
        return ""
    if isinstance(x, float):
        return repr(x)
    return str(x)


def sweep_table(spec: ExperimentSpec, results: list[CellResult]) -> str:
    """CSV with one row per cell followed by one aggregate row per value."""
    buf = io.StringIO()
    echo = {"param": spec.param, "values": list(spec.values), "seeds": list(spec.seeds),
            "config": spec.base.to_dict()}
    buf.write("# " + json.dumps(echo, sort_keys=True) + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SWEEP_COLUMNS)
    for r in results:
        row = ["cell", spec.param, r.value, r.seed, r.status]
        row += [(r.summary or {}).get(m) for m in METRICS]
        row += [None] * len(METRICS)
        w.writerow([_cell(x) for x in row])
    agg = aggregate(results, spec.values)
    for v in spec.values:
        a = agg[v]
        status = "ok" if a["n"] == len(spec.seeds) else f"partial({a['n']}/{len(spec.seeds)})"
        row = ["mean", spec.param, v, "", status] + [a[m] for m in METRICS] + [a[m + "_se"] for m in METRICS]
        w.writerow([_cell(x) for x in row])
    return buf.getvalue()
