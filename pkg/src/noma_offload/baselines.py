"""Comparison schedulers: equal-split OFDMA and a static (queue-blind) plan.

The OFDMA scheduler is a desk-scale stand-in: K active devices split the
band equally and each picks its own power.  Subchannel assignment is not
optimised.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .noma_solver import BarrierProblem, feasibility_backoff, powers_from_tau, rates_from_tau, sic_rates, solve_barrier
from .scheduler import SlotDecision, decide_cpu_frequency, decide_offloading

BASELINE_KINDS = ("ofdma", "static")
OFDMA_LABEL = "ofdma (equal-split approximation)"


def ofdma_subband(k_active: int, cfg):
    """Bandwidth and noise power of each of the ``k_active`` equal subbands."""
    w_sub = cfg.bandwidth_hz / k_active
    n_sub = cfg.noise_w / k_active if cfg.ofdma_noise == "split" else cfg.noise_w
    return w_sub, n_sub


def ofdma_rates(p, gains, k_active: int, cfg):
    w_sub, n_sub = ofdma_subband(k_active, cfg)
    return w_sub * np.log2(1.0 + np.asarray(gains) * np.asarray(p) / n_sub)


def ofdma_power(q_off_hat, q_p_hat, q_bs_hat, weights, gains, k_active, cfg, iters: int = 100):
    """Per-device minimiser of the decoupled power subproblem on one subband.

    Solved in the rate variable, where the objective is convex, by bisection
    on its increasing derivative over ``[0, R(p_max)]``.
    """
    gains = np.asarray(gains, dtype=float)
    w_sub, n_sub = ofdma_subband(k_active, cfg)
    uq = cfg.queue_unit_bits
    a = np.asarray(q_p_hat, dtype=float)
    b = (q_bs_hat - np.asarray(q_off_hat, dtype=float)) * cfg.delta_t / uq ** 2
    v = cfg.v_param * np.asarray(weights, dtype=float) / cfg.log_scale
    u = cfg.rate_unit_scale
    c = n_sub / gains
    r_hi = w_sub * np.log2(1.0 + cfg.p_max / c)

    def deriv(rate):
        return a * c * np.log(2.0) / w_sub * np.exp2(rate / w_sub) + b - v * u / (1.0 + u * rate)

    lo = np.zeros_like(gains)
    hi = r_hi.copy()
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        pos = deriv(mid) > 0
        hi = np.where(pos, mid, hi)
        lo = np.where(pos, lo, mid)
    rate = 0.5 * (lo + hi)
    rate = np.where(deriv(np.zeros_like(gains)) >= 0, 0.0, rate)
    rate = np.where(deriv(r_hi) <= 0, r_hi, rate)
    p = np.minimum(c * (np.exp2(rate / w_sub) - 1.0), cfg.p_max)
    return p, rate


def ofdma_slot(state, snapshot, gains, weights, f_max, kappa, cycles_per_bit, cfg) -> SlotDecision:
    """OFDMA slot: device-side rules for rho and f, equal-split power per active device."""
    rho = decide_offloading(state.q_off, state.q_loc)
    f = decide_cpu_frequency(state.q_loc, state.q_p, f_max, kappa, cycles_per_bit, cfg)
    n = state.n_devices
    p = np.zeros(n)
    rates = np.zeros(n)
    act = np.flatnonzero(state.q_off > 0)
    if act.size:
        pa, _ = ofdma_power(snapshot.q_off_hat[act], snapshot.q_p_hat[act], state.q_bs, np.asarray(weights)[act],
                            np.asarray(gains)[act], act.size, cfg)
        p[act] = pa
        rates[act] = ofdma_rates(pa, np.asarray(gains)[act], act.size, cfg)
    return SlotDecision(rho=rho, f=f, p_tx=p, rates_bps=rates)


@dataclass
class StaticPlan:
    """A schedule fixed at slot 0 from pathloss-only gains and mean arrivals."""

    decision: SlotDecision
    mean_gains: np.ndarray


def build_static_plan(mean_gains, weights, mean_arrival_bits, f_max, kappa, cycles_per_bit, cfg) -> StaticPlan:
    g = np.asarray(mean_gains, dtype=float)
    n = g.size
    weights = np.asarray(weights, dtype=float)
    kappa = np.broadcast_to(np.asarray(kappa, dtype=float), (n,))
    f_max = np.broadcast_to(np.asarray(f_max, dtype=float), (n,))
    cpb = np.broadcast_to(np.asarray(cycles_per_bit, dtype=float), (n,))
    zero = SlotDecision(np.zeros(n, dtype=int), np.zeros(n), np.zeros(n), np.zeros(n))
    if mean_arrival_bits <= 0:
        return StaticPlan(zero, g)

    def allocate(active):
        p = np.zeros(n)
        rates = np.zeros(n)
        if active.size == 0:
            return p, rates
        act = active[np.argsort(-g[active], kind="stable")]
        prob = BarrierProblem(g[act], cfg.noise_w, 0.0, 0.0, weights[act] / cfg.log_scale,
                              cfg.rate_unit_scale * cfg.bandwidth_hz, cfg.p_ave)
        tau, _ = feasibility_backoff(solve_barrier(prob).tau, g[act], cfg.noise_w, cfg.p_ave)
        p[act] = np.maximum(powers_from_tau(tau, g[act], cfg.noise_w), 0.0)
        rates[act] = cfg.bandwidth_hz * np.maximum(rates_from_tau(tau), 0.0)
        return p, rates

    p, rates = allocate(np.arange(n))
    f_full = np.minimum(f_max, np.cbrt(cfg.p_ave / kappa))
    local_service = f_full * cfg.delta_t / cpb
    rho = (rates * cfg.delta_t >= local_service).astype(int)
    if not np.all(rho == 1):
        p, rates = allocate(np.flatnonzero(rho == 1))
    f = np.minimum(f_max, np.cbrt(np.maximum(cfg.p_ave - p, 0.0) / kappa))
    return StaticPlan(SlotDecision(rho=rho, f=f, p_tx=p, rates_bps=rates), g)


def static_slot(plan: StaticPlan, cfg) -> SlotDecision:
    """The plan's decision, replayed unchanged."""
    d = plan.decision
    return SlotDecision(d.rho.copy(), d.f.copy(), d.p_tx.copy(), d.rates_bps.copy())


def static_achieved_rates(p_tx, transmitting, gains, cfg):
    """SIC rates actually obtained by the planned powers on this slot's channel."""
    gains = np.asarray(gains, dtype=float)
    p = np.where(transmitting, p_tx, 0.0)
    order = np.argsort(-gains, kind="stable")
    rates = np.empty_like(p)
    rates[order] = sic_rates(p[order], gains[order], cfg.noise_w, cfg.bandwidth_hz)
    return rates
