"""Seedable channel and arrival generation.

Every draw is a pure function of ``(seed, stream, slot)``: a fresh
``numpy.random.Generator`` is spawned from a ``SeedSequence`` keyed on those
values, so slots can be regenerated in any order, from any worker.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

PATHLOSS_COEF = 1e-3

_STREAM_IDS = {"channel": 1, "arrival": 2, "profile": 3}


@dataclass(frozen=True)
class DeviceProfile:
    device_id: int
    distance_m: float
    weight: float
    f_max: float = 4e8
    kappa: float = 1e-26
    cycles_per_bit: float = 6400.0

    def __post_init__(self):
        if not self.distance_m > 0:
            raise ValueError(f"device {self.device_id}: distance_m must be > 0")
        if not self.weight >= 0:
            raise ValueError(f"device {self.device_id}: weight must be >= 0")
        if not self.f_max > 0:
            raise ValueError(f"device {self.device_id}: f_max must be > 0")
        if not self.kappa > 0:
            raise ValueError(f"device {self.device_id}: kappa must be > 0")
        if not self.cycles_per_bit > 0:
            raise ValueError(f"device {self.device_id}: cycles_per_bit must be > 0")

    @property
    def mean_gain(self) -> float:
        return PATHLOSS_COEF * self.distance_m ** -2


@dataclass(frozen=True)
class RngStream:
    seed: int
    stream_id: str

    def __post_init__(self):
        if self.stream_id not in _STREAM_IDS:
            raise ValueError(f"unknown stream {self.stream_id!r}")
        if not 0 <= int(self.seed) < 2 ** 64:
            raise ValueError("seed must fit in 64 unsigned bits")

    def generator(self, slot: int) -> np.random.Generator:
        ss = np.random.SeedSequence(int(self.seed), spawn_key=(_STREAM_IDS[self.stream_id], int(slot)))
        return np.random.Generator(np.random.PCG64(ss))


@dataclass
class ChannelDraw:
    gains: np.ndarray
    order: np.ndarray

    def __post_init__(self):
        self.gains = np.asarray(self.gains, dtype=float)
        self.order = np.asarray(self.order, dtype=np.intp)


@dataclass
class ArrivalDraw:
    bits: np.ndarray


def gain_order(gains: np.ndarray) -> np.ndarray:
    """Indices sorting ``gains`` descending; ties go to the lower index."""
    # stable sort on the negated gains keeps ascending id among equals
    return np.argsort(-np.asarray(gains, dtype=float), kind="stable")


def profile_arrays(profiles: Sequence[DeviceProfile]) -> dict:
    return {
        "distance_m": np.array([p.distance_m for p in profiles]),
        "weight": np.array([p.weight for p in profiles]),
        "f_max": np.array([p.f_max for p in profiles]),
        "kappa": np.array([p.kappa for p in profiles]),
        "cycles_per_bit": np.array([p.cycles_per_bit for p in profiles]),
    }


def sample_channel_gains(profiles: Sequence[DeviceProfile], slot: int, rng: RngStream,
                         fading: str = "rayleigh") -> ChannelDraw:
    """Block-fading gains ``1e-3 * d**-2 * h`` for one slot.

    ``fading='rayleigh'`` draws unit-mean exponential power ``h``;
    ``fading='none'`` sets ``h = 1`` (pathloss only).
    """
    d = np.array([p.distance_m for p in profiles], dtype=float)
    if fading == "rayleigh":
        h = rng.generator(slot).exponential(1.0, size=d.size)
        # exponential can return exactly 0.0; gains must stay positive
        h = np.maximum(h, np.finfo(float).tiny)
    elif fading == "none":
        h = np.ones_like(d)
    else:
        raise ValueError(f"unknown fading law {fading!r}")
    gains = PATHLOSS_COEF * d ** -2 * h
    return ChannelDraw(gains=gains, order=gain_order(gains))


def sample_arrivals(profiles: Sequence[DeviceProfile], slot: int, rng: RngStream,
                    a_max_bps: float, delta_t: float) -> ArrivalDraw:
    if a_max_bps < 0 or delta_t <= 0:
        raise ValueError("need a_max_bps >= 0 and delta_t > 0")
    n = len(profiles)
    if a_max_bps == 0:
        return ArrivalDraw(bits=np.zeros(n))
    u = rng.generator(slot).uniform(0.0, 1.0, size=n)
    return ArrivalDraw(bits=u * a_max_bps * delta_t)


def draw_profiles(n_devices: int, seed: int, *, distance_range=(10.0, 100.0), weight_max: int = 10,
                  f_max: float = 4e8, kappa: float = 1e-26, cycles_per_bit: float = 6400.0,
                  distances: Sequence[float] | None = None,
                  weights: Sequence[float] | None = None) -> list[DeviceProfile]:
    """Per-run device population: U[lo, hi] distances and U_d{0..weight_max} weights."""
    g = RngStream(seed, "profile").generator(0)
    lo, hi = distance_range
    d = g.uniform(lo, hi, size=n_devices)
    w = g.integers(0, weight_max, size=n_devices, endpoint=True).astype(float)
    if distances is not None:
        d = np.asarray(distances, dtype=float)
    if weights is not None:
        w = np.asarray(weights, dtype=float)
    if d.size != n_devices or w.size != n_devices:
        raise ValueError("explicit distances/weights must have one entry per device")
    return [
        DeviceProfile(device_id=i, distance_m=float(d[i]), weight=float(w[i]), f_max=f_max,
                      kappa=kappa, cycles_per_bit=cycles_per_bit)
        for i in range(n_devices)
    ]
