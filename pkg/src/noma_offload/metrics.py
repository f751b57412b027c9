"""Utility, fairness and time-average summaries of a run."""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass

import numpy as np


def utility(rates_bps, weights, x_off, rate_unit_scale: float, log_scale: float = 1.0):
    """Per-device ``w * log(1 + x_off * u * R)`` and their sum."""
    per = np.asarray(weights, dtype=float) * np.log1p(
        np.asarray(x_off, dtype=float) * rate_unit_scale * np.asarray(rates_bps, dtype=float)) / log_scale
    return per, float(np.sum(per))


def jains_index(values) -> float:
    x = np.asarray(values, dtype=float)
    if x.size == 0:
        return 1.0
    sq = float(np.sum(x * x))
    if sq == 0.0:
        return 1.0
    return float(np.sum(x)) ** 2 / (x.size * sq)


def weight_normalised(throughput, weights):
    """throughput / weight over devices with positive weight."""
    w = np.asarray(weights, dtype=float)
    keep = w > 0
    return np.asarray(throughput, dtype=float)[keep] / w[keep]


@dataclass
class SlotRecord:
    slot: int
    utility: np.ndarray
    rate: np.ndarray
    power: np.ndarray
    q_loc: np.ndarray
    q_off: np.ndarray
    q_p: np.ndarray
    q_bs: float
    feedback_count: int
    backoff_flag: bool
    knowledge_gap: float = 0.0
    arrivals: np.ndarray = None


class RunRecord:
    """Columnar store of a run's slot records."""

    def __init__(self, horizon: int, n_devices: int):
        shape = (horizon, n_devices)
        self.n = 0
        self.utility = np.zeros(shape)
        self.rate = np.zeros(shape)
        self.power = np.zeros(shape)
        self.q_loc = np.zeros(shape)
        self.q_off = np.zeros(shape)
        self.q_p = np.zeros(shape)
        self.arrivals = np.zeros(shape)
        self.q_bs = np.zeros(horizon)
        self.feedback = np.zeros(horizon, dtype=int)
        self.backoff = np.zeros(horizon, dtype=bool)
        self.knowledge_gap = np.zeros(horizon)

    def append(self, rec: SlotRecord):
        i = self.n
        self.utility[i] = rec.utility
        self.rate[i] = rec.rate
        self.power[i] = rec.power
        self.q_loc[i] = rec.q_loc
        self.q_off[i] = rec.q_off
        self.q_p[i] = rec.q_p
        if rec.arrivals is not None:
            self.arrivals[i] = rec.arrivals
        self.q_bs[i] = rec.q_bs
        self.feedback[i] = rec.feedback_count
        self.backoff[i] = rec.backoff_flag
        self.knowledge_gap[i] = rec.knowledge_gap
        self.n += 1

    def __len__(self):
        return self.n

    def total_queue(self) -> np.ndarray:
        """Data backlog (bits) summed over devices and the BS, per slot."""
        n = self.n
        return self.q_loc[:n].sum(axis=1) + self.q_off[:n].sum(axis=1) + self.q_bs[:n]

    def running_jain(self, weights) -> np.ndarray:
        n = self.n
        cum = np.cumsum(self.rate[:n], axis=0)
        w = np.asarray(weights, dtype=float)
        keep = w > 0
        x = cum[:, keep] / w[keep]
        sq = np.sum(x * x, axis=1)
        s = np.sum(x, axis=1)
        with np.errstate(invalid="ignore", divide="ignore"):
            j = np.where(sq > 0, s * s / (max(int(keep.sum()), 1) * sq), 1.0)
        return j


@dataclass
class RunSummary:
    horizon: int
    n_devices: int
    mean_utility: float
    utility_per_device: list
    throughput_per_device_bps: list
    power_per_device_w: list
    mean_total_queue_bits: float
    final_total_queue_bits: float
    mean_q_p: float
    jain_index: float
    stability_slope: float
    power_violation_w: float
    knowledge_gap_max_ratio: float
    backoff_count: int
    feedback_msgs: int
    mean_delay_slots: float

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def stability_slope(total_queue, tail_fraction: float = 0.5) -> float:
    """Least-squares slope of the backlog tail divided by its mean (per slot)."""
    q = np.asarray(total_queue, dtype=float)
    start = min(int(len(q) * (1.0 - tail_fraction)), len(q) - 2)
    tail = q[max(start, 0):]
    mean = float(np.mean(tail))
    if mean == 0.0:
        return 0.0
    x = np.arange(tail.size, dtype=float)
    slope = float(np.polyfit(x, tail, 1)[0])
    return slope / mean


def run_summary(records: RunRecord, weights, p_ave: float, tail_fraction: float = 0.5) -> RunSummary:
    n = len(records)
    if n < 2:
        raise ValueError("a summary needs at least two slot records")
    thr = records.rate[:n].mean(axis=0)
    power = records.power[:n].mean(axis=0)
    util = records.utility[:n].mean(axis=0)
    total = records.total_queue()
    arrivals = float(records.arrivals[:n].sum(axis=1).mean())
    mean_q = float(total.mean())
    return RunSummary(
        horizon=n,
        n_devices=records.rate.shape[1],
        mean_utility=float(records.utility[:n].sum(axis=1).mean()),
        utility_per_device=util.tolist(),
        throughput_per_device_bps=thr.tolist(),
        power_per_device_w=power.tolist(),
        mean_total_queue_bits=mean_q,
        final_total_queue_bits=float(total[-1]),
        mean_q_p=float(records.q_p[:n].mean()),
        jain_index=jains_index(weight_normalised(thr, weights)),
        stability_slope=stability_slope(total, tail_fraction),
        power_violation_w=float(np.max(power - p_ave)),
        knowledge_gap_max_ratio=float(records.knowledge_gap[:n].max()),
        backoff_count=int(records.backoff[:n].sum()),
        feedback_msgs=int(records.feedback[:n].sum()),
        mean_delay_slots=mean_q / arrivals if arrivals > 0 else 0.0,
    )
