"""Brute-force reference solutions for the per-slot subproblems.

These are deliberately naive (enumeration, dense grids, scalar bisection)
and share no code with the production solvers beyond plain numpy, so they
can serve as independent checks in tests and in ``verify``.
"""
from __future__ import annotations

import itertools
import math

import numpy as np

LN2 = math.log(2.0)


# ---------------------------------------------------------------- offloading

def h1_value(rho, q_off, q_loc, arrivals) -> float:
    rho = np.asarray(rho, dtype=float)
    q_off = np.asarray(q_off, dtype=float)
    q_loc = np.asarray(q_loc, dtype=float)
    a = np.asarray(arrivals, dtype=float)
    return float(np.sum((q_off - q_loc) * a * rho + q_loc * a))


def h1_enumerate(q_off, q_loc, arrivals):
    """Minimum of the offloading objective over all 2^M binary vectors.

    Returns ``(min_value, all_values, vectors)`` with ``vectors`` of shape (2^M, M).
    """
    m = len(q_off)
    vecs = np.array(list(itertools.product((0, 1), repeat=m)), dtype=float).reshape(-1, m)
    coef = (np.asarray(q_off, dtype=float) - np.asarray(q_loc, dtype=float)) * np.asarray(arrivals, dtype=float)
    base = float(np.sum(np.asarray(q_loc, dtype=float) * np.asarray(arrivals, dtype=float)))
    vals = vecs @ coef + base
    return float(vals.min()), vals, vecs


def h1_tolerance(q_off, q_loc, arrivals) -> float:
    """Rounding allowance for comparing H1 values: scales with the summed terms, not the result."""
    a = np.abs(np.asarray(arrivals, dtype=float))
    return 1e-12 * (1.0 + float(np.sum((np.abs(q_off) + 2 * np.abs(q_loc)) * a)))


# ---------------------------------------------------------------- CPU frequency

def h2_device(f, q_loc, q_p, kappa, cycles_per_bit, delta_t, unit=1.0):
    """Per-device CPU term ``q_p*kappa*f^3 - (q_loc/unit) * f*dt/(C*unit)``."""
    f = np.asarray(f, dtype=float)
    return q_p * kappa * f ** 3 - (q_loc / unit) * f * delta_t / (cycles_per_bit * unit)


def h2_grid(q_loc, q_p, f_max, kappa, cycles_per_bit, delta_t, unit=1.0, points: int = 10_000):
    """Grid minimum of the per-device CPU term on ``[0, f_max]`` and its resolution bound.

    The bound is ``L * h / 2`` with ``L`` the largest slope magnitude on the
    interval and ``h`` the grid spacing.
    """
    grid = np.linspace(0.0, f_max, points)
    vals = h2_device(grid, q_loc, q_p, kappa, cycles_per_bit, delta_t, unit)
    lin = q_loc * delta_t / (cycles_per_bit * unit * unit)
    lip = max(abs(lin), abs(3.0 * q_p * kappa * f_max ** 2 - lin))
    h = f_max / (points - 1)
    return float(vals.min()), 0.5 * lip * h


# ---------------------------------------------------------------- power allocation

def anchored_shares(rates, gains, n0):
    """Per-device power shares from spectral efficiencies, written out term by term."""
    r = np.asarray(rates, dtype=float)
    g = np.asarray(gains, dtype=float)
    k = r.size
    out = np.empty(k)
    for m in range(k):
        tail = float(np.sum(r[m:]))
        prev = 0.0 if m == 0 else 1.0 / g[m - 1]
        c = n0 * (1.0 / g[m] - prev)
        out[m] = c * (2.0 ** tail - 1.0)
    return out


def sic_powers(rates, gains, n0):
    """Physical powers achieving ``rates`` (bits/s/Hz), weakest device first."""
    r = np.asarray(rates, dtype=float)
    g = np.asarray(gains, dtype=float)
    p = np.zeros(r.size)
    interference = 0.0
    for m in range(r.size - 1, -1, -1):
        p[m] = (2.0 ** r[m] - 1.0) * (interference + n0) / g[m]
        interference += g[m] * p[m]
    return p


def power_objective(rates, gains, n0, a, b, v, s) -> float:
    r = np.asarray(rates, dtype=float)
    sh = anchored_shares(r, gains, n0)
    return float(np.sum(np.asarray(a) * sh + np.asarray(b) * r - np.asarray(v) * np.log1p(s * r)))


def two_device_grid(gains, n0, a, b, v, s, p_max, points: int = 400):
    """Grid minimum of the two-device power objective in rate space.

    Gains are sorted descending.  The box for each rate follows from its own
    share cap; infeasible grid points are skipped.  Returns
    ``(min_value, argmin_rates, lipschitz_tol)`` where the tolerance is the
    objective's Lipschitz bound over the box times one grid step per axis.
    """
    g = np.asarray(gains, dtype=float)
    a = np.broadcast_to(np.asarray(a, dtype=float), (2,))
    b = np.broadcast_to(np.asarray(b, dtype=float), (2,))
    v = np.broadcast_to(np.asarray(v, dtype=float), (2,))
    c1 = n0 / g[0]
    c2 = n0 * (1.0 / g[1] - 1.0 / g[0])
    t1 = math.log2(1.0 + p_max / c1)
    t2 = math.log2(1.0 + p_max / c2) if c2 > 0 else t1
    r1 = np.linspace(0.0, t1, points)
    r2 = np.linspace(0.0, min(t1, t2), points)
    R1, R2 = np.meshgrid(r1, r2, indexing="ij")
    tau1 = R1 + R2
    sh1 = c1 * (np.exp2(tau1) - 1.0)
    sh2 = c2 * (np.exp2(R2) - 1.0)
    vals = a[0] * sh1 + a[1] * sh2 + b[0] * R1 + b[1] * R2 - v[0] * np.log1p(s * R1) - v[1] * np.log1p(s * R2)
    feas = (sh1 <= p_max) & (sh2 <= p_max)
    vals = np.where(feas, vals, np.inf)
    i = np.unravel_index(np.argmin(vals), vals.shape)
    # slope bounds of F along r1 and r2 over the box
    e1 = c1 * LN2 * 2.0 ** t1
    l1 = abs(a[0]) * e1 + abs(b[0]) + abs(v[0]) * s
    l2 = abs(a[0]) * e1 + abs(a[1]) * c2 * LN2 * 2.0 ** min(t1, t2) + abs(b[1]) + abs(v[1]) * s
    h1 = r1[1] - r1[0]
    h2 = r2[1] - r2[0]
    return float(vals[i]), np.array([R1[i], R2[i]]), l1 * h1 + l2 * h2


def single_device_optimum(gain, n0, a, b, v, s, p_max, tol: float = 1e-13) -> float:
    """Minimiser of ``a*c*(2^x - 1) + b*x - v*log(1 + s*x)`` over the share-feasible interval."""
    c = n0 / gain
    hi = math.log2(1.0 + p_max / c)

    def deriv(x):
        return a * c * LN2 * 2.0 ** x + b - v * s / (1.0 + s * x)

    if deriv(0.0) >= 0.0:
        return 0.0
    if deriv(hi) <= 0.0:
        return hi
    lo = 0.0
    while hi - lo > tol * max(1.0, hi):
        mid = 0.5 * (lo + hi)
        if deriv(mid) > 0.0:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


# ---------------------------------------------------------------- transform identities

def random_monotone_tau(rng: np.random.Generator, k: int, scale: float = 4.0):
    r = rng.exponential(scale / k, size=k)
    return np.cumsum(r[::-1])[::-1]


def transform_errors(tau, gains, n0, bandwidth=1.0):
    """Relative errors of the rate/power round trip and the share-sum identity.

    Uses the package transform; the checks themselves are independent
    (SIC forward rates and the telescoped total power).
    """
    from . import noma_solver as ns

    tau = np.asarray(tau, dtype=float)
    g = np.asarray(gains, dtype=float)
    p = ns.powers_from_tau(tau, g, n0)
    rates = ns.sic_rates(p, g, n0, bandwidth) / bandwidth
    r_true = ns.rates_from_tau(tau)
    rt = float(np.max(np.abs(rates - r_true)) / max(1.0, float(np.max(np.abs(r_true)))))
    p_back = sic_powers(r_true, g, n0)
    # at tau = 0 every power is zero; fall back to the size of the terms being cancelled
    term_scale = float(n0 * 2.0 ** tau[0] / g[-1])
    pw = float(np.max(np.abs(p_back - p)) / max(np.max(np.abs(p)), term_scale))
    total = n0 * (2.0 ** tau[0] / g[0] + float(np.sum((1.0 / g[1:] - 1.0 / g[:-1]) * 2.0 ** tau[1:]))) - n0 / g[-1]
    shares = ns.shares_from_tau(tau, g, n0)
    denom = max(abs(total), float(np.sum(np.abs(shares))), term_scale)
    ss = max(abs(float(np.sum(shares)) - float(np.sum(p))), abs(float(np.sum(shares)) - total)) / denom
    return rt, pw, ss
