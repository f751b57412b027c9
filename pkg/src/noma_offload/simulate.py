"""Slot-by-slot simulation of one scenario and its CSV/JSON outputs."""
from __future__ import annotations

import json
import os
import tempfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import baselines
from .config import ScenarioConfig
from .env import RngStream, draw_profiles, profile_arrays, sample_arrivals, sample_channel_gains
from .metrics import RunRecord, SlotRecord, run_summary, utility
from .noma_solver import SolverFailure, solve_power_allocation
from .queues import ServiceOutcome, SystemState, advance_queues, power_draw, service_rates
from .scheduler import (KnowledgeStore, SlotDecision, decide_cpu_frequency, decide_offloading, gap_bounds,
                        knowledge_gap_ratio)

CSV_COLUMNS = ("slot", "sum_utility", "sum_q_loc", "sum_q_off", "q_bs", "sum_q_p", "sum_power_w",
               "jain_index", "feedback_msgs", "backoff_flag")


class Simulation:
    """One seeded run: device population, RNG streams, state and knowledge store."""

    def __init__(self, cfg: ScenarioConfig, seed: int):
        self.cfg = cfg
        self.sched = cfg.scheduler
        self.seed = int(seed)
        env = cfg.env
        self.profiles = draw_profiles(cfg.n_devices, self.seed, distance_range=env.distance_range,
                                      weight_max=env.weight_max, f_max=env.f_max, kappa=env.kappa,
                                      cycles_per_bit=env.cycles_per_bit, distances=env.distances,
                                      weights=env.weights)
        arr = profile_arrays(self.profiles)
        self.weights = arr["weight"]
        self.f_max = arr["f_max"]
        self.kappa = arr["kappa"]
        self.cpb = arr["cycles_per_bit"]
        self.mean_gains = np.array([p.mean_gain for p in self.profiles])
        self.channel_rng = RngStream(self.seed, "channel")
        self.arrival_rng = RngStream(self.seed, "arrival")
        self.state = SystemState.empty(cfg.n_devices)
        self.store = KnowledgeStore(self.state, self.sched.feedback_period)
        self.a_max_bits = env.a_max_bps * self.sched.delta_t
        self.rate_max_bits = np.zeros(cfg.n_devices)
        self.plan = None
        if cfg.scheduler_kind == "static":
            self.plan = baselines.build_static_plan(self.mean_gains, self.weights, 0.5 * self.a_max_bits,
                                                    self.f_max, self.kappa, self.cpb, self.sched)

    def draws(self, slot: int):
        ch = sample_channel_gains(self.profiles, slot, self.channel_rng, fading=self.cfg.env.fading)
        ar = sample_arrivals(self.profiles, slot, self.arrival_rng, self.cfg.env.a_max_bps, self.sched.delta_t)
        return ch, ar

    def step(self):
        ch, ar = self.draws(self.state.slot)
        decision, new_state, record = run_slot(self, self.state, ch.gains, ar.bits)
        self.state = new_state
        return decision, record


def run_slot(sim: Simulation, state: SystemState, gains, arrivals):
    """Advance one slot: device decisions, feedback, power allocation, queue update, record."""
    cfg = sim.sched
    kind = sim.cfg.scheduler_kind
    backoff = False
    if kind == "static":
        decision = baselines.static_slot(sim.plan, cfg)
        feedback = 0
        gap = 0.0
        transmitting = (state.q_off > 0) & (decision.p_tx > 0)
        decision.p_tx = np.where(transmitting, decision.p_tx, 0.0)
        decision.rates_bps = baselines.static_achieved_rates(decision.p_tx, transmitting, gains, cfg)
    else:
        rho = decide_offloading(state.q_off, state.q_loc)
        f = decide_cpu_frequency(state.q_loc, state.q_p, sim.f_max, sim.kappa, sim.cpb, cfg)
        feedback = sim.store.refresh(state)
        snap = sim.store.snapshot
        bounds = gap_bounds(sim.a_max_bits, sim.f_max, sim.cpb, sim.kappa, sim.rate_max_bits, cfg)
        gap = knowledge_gap_ratio(snap, state, bounds, cfg.feedback_period) if cfg.feedback_period > 1 else 0.0
        if kind == "proposed":
            active = np.flatnonzero(state.q_off > 0)
            try:
                alloc = solve_power_allocation(snap, state.q_bs, gains, active, sim.weights, cfg)
            except SolverFailure as exc:
                exc.instance.update(seed=sim.seed, slot=state.slot)
                raise
            backoff = alloc.backed_off
            decision = SlotDecision(rho=rho, f=f, p_tx=alloc.p_physical, rates_bps=alloc.rates_bps)
        else:
            decision = baselines.ofdma_slot(state, snap, gains, sim.weights, sim.f_max, sim.kappa, sim.cpb, cfg)
    mu_loc, mu_bs = service_rates(decision.f, cfg.f_bs, sim.cpb, cfg.delta_t)
    p_loc, p_tot, x_loc, x_off = power_draw(decision.f, decision.p_tx, state, sim.kappa)
    outcome = ServiceOutcome(mu_loc=mu_loc, mu_bs=mu_bs, p_loc=p_loc, p_tot=p_tot, x_loc=x_loc, x_off=x_off)
    rate_bits = decision.rates_bps * cfg.delta_t
    new_state = advance_queues(state, decision.rho, arrivals, rate_bits, outcome, cfg.p_ave)
    np.maximum(sim.rate_max_bits, rate_bits, out=sim.rate_max_bits)
    util, _ = utility(decision.rates_bps, sim.weights, x_off, cfg.rate_unit_scale, cfg.log_scale)
    record = SlotRecord(slot=state.slot, utility=util, rate=x_off * decision.rates_bps, power=p_tot,
                        q_loc=new_state.q_loc, q_off=new_state.q_off, q_p=new_state.q_p, q_bs=new_state.q_bs,
                        feedback_count=feedback, backoff_flag=backoff, knowledge_gap=gap, arrivals=arrivals)
    return decision, new_state, record


@dataclass
class RunResult:
    seed: int
    summary: object
    records: RunRecord
    weights: np.ndarray


def simulate(cfg: ScenarioConfig, seed: int, tail_fraction: float = 0.5) -> RunResult:
    sim = Simulation(cfg, seed)
    rec = RunRecord(cfg.horizon, cfg.n_devices)
    for _ in range(cfg.horizon):
        _, r = sim.step()
        rec.append(r)
    summary = run_summary(rec, sim.weights, cfg.scheduler.p_ave, tail_fraction) if cfg.horizon >= 2 else None
    return RunResult(seed=sim.seed, summary=summary, records=rec, weights=sim.weights)


# ---------------------------------------------------------------- output

def atomic_write_text(path, text: str):
    """Write via a temp file in the target directory, then rename over ``path``."""
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp = tempfile.mkstemp(prefix=path.name + ".", suffix=".tmp", dir=path.parent)
    except OSError as exc:
        raise OSError(exc.errno, f"cannot write {path}: {exc.strerror}") from exc
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def slot_csv(result: RunResult, cfg: ScenarioConfig) -> str:
    rec = result.records
    n = len(rec)
    jain = rec.running_jain(result.weights)
    cols = [
        np.arange(n),
        rec.utility[:n].sum(axis=1),
        rec.q_loc[:n].sum(axis=1),
        rec.q_off[:n].sum(axis=1),
        rec.q_bs[:n],
        rec.q_p[:n].sum(axis=1),
        rec.power[:n].sum(axis=1),
        jain,
        rec.feedback[:n],
        rec.backoff[:n],
    ]
    lines = ["# " + json.dumps({"seed": result.seed, "config": cfg.to_dict()}, sort_keys=True),
             ",".join(CSV_COLUMNS)]
    for i in range(n):
        lines.append(",".join(_fmt(c[i]) for c in cols))
    return "\n".join(lines) + "\n"


def summary_document(cfg: ScenarioConfig, results) -> dict:
    doc = {"config": cfg.to_dict(), "seeds": [r.seed for r in results],
           "runs": [dict(seed=r.seed, **(r.summary.to_dict() if r.summary else {})) for r in results]}
    if cfg.scheduler_kind == "ofdma":
        doc["note"] = baselines.OFDMA_LABEL
    return doc


def run_scenario(cfg: ScenarioConfig, out_dir=None, seeds=None):
    """Run every seed of ``cfg``; write per-seed slot CSVs and ``summary.json`` when ``out_dir`` is set."""
    cfg = cfg.validate()
    seeds = tuple(cfg.seeds if seeds is None else seeds)
    results = [simulate(cfg, s) for s in seeds]
    out_dir = out_dir if out_dir is not None else cfg.output_dir
    if out_dir is not None:
        out = Path(out_dir)
        for r in results:
            atomic_write_text(out / f"slots_seed{r.seed}.csv", slot_csv(r, cfg))
        atomic_write_text(out / "summary.json", json.dumps(summary_document(cfg, results), indent=2) + "\n")
    return results
