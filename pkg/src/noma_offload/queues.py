"""Queue recursions, service rates and per-device power draw.

Data queues are kept in bits, the virtual power queue in watt-slots.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np


@dataclass
class SystemState:
    q_loc: np.ndarray
    q_off: np.ndarray
    q_p: np.ndarray
    q_bs: float = 0.0
    slot: int = 0

    @classmethod
    def empty(cls, n_devices: int) -> "SystemState":
        z = np.zeros(n_devices)
        return cls(q_loc=z.copy(), q_off=z.copy(), q_p=z.copy(), q_bs=0.0, slot=0)

    @property
    def n_devices(self) -> int:
        return self.q_loc.size

    def copy(self) -> "SystemState":
        return replace(self, q_loc=self.q_loc.copy(), q_off=self.q_off.copy(), q_p=self.q_p.copy())

    def check(self):
        for name in ("q_loc", "q_off", "q_p"):
            v = getattr(self, name)
            if not (np.all(np.isfinite(v)) and np.all(v >= 0)):
                raise ValueError(f"{name} must be finite and nonnegative")
        if not (np.isfinite(self.q_bs) and self.q_bs >= 0):
            raise ValueError("q_bs must be finite and nonnegative")


@dataclass
class ServiceOutcome:
    mu_loc: np.ndarray
    mu_bs: float
    p_loc: np.ndarray
    p_tot: np.ndarray
    x_loc: np.ndarray = field(default=None)
    x_off: np.ndarray = field(default=None)


def service_rates(f, f_bs: float, cycles_per_bit, delta_t: float):
    """Bits served locally per device and at the BS during one slot.

    The BS term sums ``f_bs * dt / C_m`` over all devices, i.e. the full BS
    frequency is applied to each device's workload.
    """
    f = np.asarray(f, dtype=float)
    c = np.asarray(cycles_per_bit, dtype=float)
    assert np.all(f >= 0) and f_bs >= 0
    mu_loc = f * delta_t / c
    mu_bs = float(np.sum(f_bs * delta_t / c))
    return mu_loc, mu_bs


def queue_indicators(state: SystemState):
    x_loc = (state.q_loc > 0).astype(float)
    x_off = (state.q_off > 0).astype(float)
    return x_loc, x_off


def power_draw(f, p_tx, state: SystemState, kappa):
    """Local DVFS power and total device power ``x_loc*p_loc + x_off*p_tx``."""
    f = np.asarray(f, dtype=float)
    p_tx = np.asarray(p_tx, dtype=float)
    p_loc = np.asarray(kappa, dtype=float) * f ** 3
    x_loc, x_off = queue_indicators(state)
    p_tot = x_loc * p_loc + x_off * p_tx
    return p_loc, p_tot, x_loc, x_off


def advance_queues(state: SystemState, rho, arrivals, rate_bits, outcome: ServiceOutcome,
                   p_ave: float) -> SystemState:
    """One-slot update of all four queue families.

    ``rate_bits`` is ``R_m * dt``; it drains the offload queue and is credited
    in full to the BS queue.
    """
    rho = np.asarray(rho, dtype=float)
    a = np.asarray(arrivals, dtype=float)
    r = np.asarray(rate_bits, dtype=float)
    q_loc = np.maximum(state.q_loc - outcome.mu_loc, 0.0) + (1.0 - rho) * a
    q_off = np.maximum(state.q_off - r, 0.0) + rho * a
    q_bs = max(state.q_bs - outcome.mu_bs, 0.0) + float(np.sum(r))
    q_p = np.maximum(state.q_p - p_ave, 0.0) + outcome.p_tot
    return SystemState(q_loc=q_loc, q_off=q_off, q_p=q_p, q_bs=q_bs, slot=state.slot + 1)
