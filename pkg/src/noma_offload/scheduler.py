"""Per-slot drift-plus-penalty decisions and the BS-side partial-knowledge store."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .noma_solver import sic_rates
from .queues import SystemState


@dataclass
class SlotDecision:
    rho: np.ndarray
    f: np.ndarray
    p_tx: np.ndarray
    rates_bps: np.ndarray


@dataclass
class KnowledgeSnapshot:
    q_loc_hat: np.ndarray
    q_off_hat: np.ndarray
    q_p_hat: np.ndarray
    age: np.ndarray

    @classmethod
    def exact(cls, state: SystemState) -> "KnowledgeSnapshot":
        return cls(state.q_loc.copy(), state.q_off.copy(), state.q_p.copy(),
                   np.zeros(state.n_devices, dtype=int))


def decide_offloading(q_off, q_loc):
    """Offload (1) only when the offload queue is strictly shorter than the local one."""
    return (np.asarray(q_off) < np.asarray(q_loc)).astype(int)


def decide_cpu_frequency(q_loc, q_p, f_max, kappa, cycles_per_bit, cfg):
    """Stationary point of ``q_p*kappa*f**3 - q_loc*f*dt/C`` clipped to ``[0, f_max]``.

    Backlogs are measured in ``cfg.queue_unit_bits``.  An empty power queue
    leaves only the linear term, so the clamp ``f_max`` is returned (and 0
    when there is no local work).
    """
    q_loc = np.asarray(q_loc, dtype=float)
    q_p = np.asarray(q_p, dtype=float)
    f_max = np.broadcast_to(np.asarray(f_max, dtype=float), np.broadcast(q_loc, q_p).shape)
    uq = cfg.queue_unit_bits
    with np.errstate(divide="ignore", invalid="ignore"):
        f_stat = np.sqrt(q_loc * cfg.delta_t / (3.0 * q_p * cycles_per_bit * kappa * uq * uq))
    f = np.where(q_p > 0, np.minimum(f_max, f_stat), f_max)
    f = np.where(q_loc > 0, f, 0.0)
    return f if f.ndim else float(f)


def feedback_mask(n_devices: int, slot: int, feedback_period: int) -> np.ndarray:
    """Round-robin groups: device m reports at slots where ``slot % T == m % T``."""
    return (np.arange(n_devices) % feedback_period) == (slot % feedback_period)


def last_feedback_slot(n_devices: int, slot: int, feedback_period: int) -> np.ndarray:
    group = np.arange(n_devices) % feedback_period
    last = slot - ((slot - group) % feedback_period)
    # never reported yet: the BS holds the initial state, stamped slot 0
    return np.where(last >= 0, last, 0)


def snapshot_knowledge(history: Mapping[int, SystemState], t: int, feedback_period: int) -> KnowledgeSnapshot:
    """BS view at slot ``t`` from a ring of past states keyed by slot."""
    n = history[t].n_devices
    src = last_feedback_slot(n, t, feedback_period)
    snap = KnowledgeSnapshot(np.empty(n), np.empty(n), np.empty(n), t - src)
    for m in range(n):
        st = history[int(src[m])]
        snap.q_loc_hat[m] = st.q_loc[m]
        snap.q_off_hat[m] = st.q_off[m]
        snap.q_p_hat[m] = st.q_p[m]
    return snap


class KnowledgeStore:
    """Incremental form of :func:`snapshot_knowledge`: O(M) memory, one refresh per slot."""

    def __init__(self, initial: SystemState, feedback_period: int):
        self.feedback_period = feedback_period
        self.snapshot = KnowledgeSnapshot.exact(initial)
        self.last = np.zeros(initial.n_devices, dtype=int)

    def refresh(self, state: SystemState) -> int:
        """Take reports from this slot's group; returns the number of messages."""
        if self.feedback_period == 1:
            self.snapshot.q_loc_hat[:] = state.q_loc
            self.snapshot.q_off_hat[:] = state.q_off
            self.snapshot.q_p_hat[:] = state.q_p
            self.last[:] = state.slot
            self.snapshot.age[:] = 0
            return state.n_devices
        mask = feedback_mask(state.n_devices, state.slot, self.feedback_period)
        self.snapshot.q_loc_hat[mask] = state.q_loc[mask]
        self.snapshot.q_off_hat[mask] = state.q_off[mask]
        self.snapshot.q_p_hat[mask] = state.q_p[mask]
        self.last[mask] = state.slot
        self.snapshot.age[:] = state.slot - self.last
        return int(mask.sum())


def evaluate_subproblems(state, decision: SlotDecision, arrivals, weights, f_max, kappa, cycles_per_bit,
                         gains, cfg, x_off=None):
    """Values of the three per-slot subproblem objectives for a given decision.

    ``state`` may be a :class:`SystemState` or anything with the same queue
    attributes.  Data backlogs are normalised by ``cfg.queue_unit_bits``.
    Rates in ``decision`` are ignored; H3 uses SIC rates recomputed from
    ``decision.p_tx`` and ``gains``.
    """
    uq = cfg.queue_unit_bits
    a = np.asarray(arrivals, dtype=float) / uq
    q_loc = np.asarray(state.q_loc, dtype=float)
    q_off = np.asarray(state.q_off, dtype=float)
    q_p = np.asarray(state.q_p, dtype=float)
    rho = np.asarray(decision.rho, dtype=float)
    h1 = float(np.sum((q_off - q_loc) / uq * a * rho + q_loc / uq * a))
    f = np.asarray(decision.f, dtype=float)
    h2 = float(np.sum(q_p * kappa * f ** 3 - q_p * cfg.p_ave - q_loc / uq * f * cfg.delta_t / (cycles_per_bit * uq)))
    gains = np.asarray(gains, dtype=float)
    p = np.asarray(decision.p_tx, dtype=float)
    order = np.argsort(-gains, kind="stable")
    rates = np.empty_like(p)
    rates[order] = sic_rates(p[order], gains[order], cfg.noise_w, cfg.bandwidth_hz)
    if x_off is None:
        x_off = (q_off > 0).astype(float)
    util = np.asarray(weights, dtype=float) * np.log1p(x_off * cfg.rate_unit_scale * rates) / cfg.log_scale
    h3 = float(np.sum(q_p * p - cfg.v_param * util + (state.q_bs - q_off) / uq * rates * cfg.delta_t / uq))
    return h1, h2, h3


def drift_penalty_bound_B(a_max, r_max, mu_max, p_max: float, mu_bs_max: float) -> float:
    """The constant B bounding the drift-plus-penalty expression."""
    r_max = np.atleast_1d(np.asarray(r_max, dtype=float))
    a_max = np.broadcast_to(np.asarray(a_max, dtype=float), r_max.shape)
    mu_max = np.broadcast_to(np.asarray(mu_max, dtype=float), r_max.shape)
    per_dev = 2 * a_max ** 2 + 2 * r_max ** 2 + mu_max ** 2 + 2 * p_max ** 2
    return float(0.5 * np.sum(per_dev) + 0.5 * mu_bs_max ** 2)


@dataclass
class GapBounds:
    """Per-slot change bounds for each queue family (used by the knowledge-gap monitor)."""

    loc: np.ndarray
    off: np.ndarray
    p: np.ndarray


def gap_bounds(a_max_bits, f_max, cycles_per_bit, kappa, rate_max_bits, cfg) -> GapBounds:
    loc = np.maximum(a_max_bits, cfg.delta_t * np.asarray(f_max) / cycles_per_bit)
    off = np.maximum(a_max_bits, np.asarray(rate_max_bits, dtype=float))
    p = np.maximum(np.asarray(kappa) * np.asarray(f_max) ** 3 + cfg.p_max, cfg.p_ave)
    return GapBounds(np.broadcast_to(loc, off.shape), off, np.broadcast_to(p, off.shape))


def knowledge_gap_ratio(snapshot: KnowledgeSnapshot, state: SystemState, bounds: GapBounds,
                        feedback_period: int) -> float:
    """max |q_hat - q| / (T * delta) over devices and queue families; <= 1 is compliant."""
    worst = 0.0
    for hat, true, delta in ((snapshot.q_loc_hat, state.q_loc, bounds.loc),
                             (snapshot.q_off_hat, state.q_off, bounds.off),
                             (snapshot.q_p_hat, state.q_p, bounds.p)):
        gap = np.abs(hat - true)
        if np.any(gap > 0):
            with np.errstate(divide="ignore"):
                ratio = np.where(gap > 0, gap / (feedback_period * delta), 0.0)
            worst = max(worst, float(np.max(ratio)))
    return worst
