"""Uplink NOMA with SIC: rates, the tail-cumulative-rate transform, and a
log-barrier Newton solver for the per-slot power allocation.

Solver variables are spectral efficiencies ``r = R / W`` (bits/s/Hz) of the
active devices sorted by descending gain, reparametrised as tail sums
``tau[m] = r[m] + r[m+1] + ... + r[K-1]``.  Under that change of variables

    g_m p_m = n0 * (2**tau[m] - 2**tau[m+1])

and the total transmit power telescopes into per-device *shares*

    share_m = n0 * (1/g_m - 1/g_{m-1}) * 2**tau[m] - c_m,   1/g_0 = 0,

each convex in ``tau``.  The constants c_m sum to n0 / g_K.  Split equally
they give the reported shares; the solver's box constraint instead uses the
anchored split c_m = n0 * (1/g_m - 1/g_{m-1}), under which every share is
zero at tau = 0, so the constrained set always has an interior.  The objective

    F(tau) = sum_m a_m share_m + b_m r_m - v_m log(1 + s r_m)

couples only neighbouring entries of ``tau``, so each Newton system is
tridiagonal and is solved in O(K).
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit

LN2 = math.log(2.0)

# barrier-method constants
TAU_INIT_RATE = 1e-3
BARRIER_GROWTH = 10.0
GAP_RTOL = 1e-8
MAX_NEWTON_PER_STAGE = 50
ARMIJO_C = 1e-4
ARMIJO_SHRINK = 0.5
MAX_FAILED_STAGES = 3
BACKOFF_TOL = 1e-6


class SolverFailure(RuntimeError):
    """Newton made no progress for several consecutive barrier stages."""

    def __init__(self, message, instance=None):
        super().__init__(message)
        self.instance = instance or {}

    def dump(self) -> str:
        return json.dumps(self.instance, sort_keys=True)


# ---------------------------------------------------------------- SIC and transform

def sic_rates(p, gains, n0: float, bandwidth: float) -> np.ndarray:
    """Achievable SIC rates (bits/s); devices must be sorted by descending gain."""
    p = np.asarray(p, dtype=float)
    g = np.asarray(gains, dtype=float)
    rx = g * p
    # interference seen by m: every weaker (later) device
    tail = np.concatenate([np.cumsum(rx[::-1])[::-1][1:], [0.0]])
    return bandwidth * np.log2(1.0 + rx / (tail + n0))


def tau_from_rates(rates_bps, bandwidth: float) -> np.ndarray:
    r = np.asarray(rates_bps, dtype=float) / bandwidth
    return np.cumsum(r[::-1])[::-1].copy()


def rates_from_tau(tau) -> np.ndarray:
    tau = np.asarray(tau, dtype=float)
    return tau - np.append(tau[1:], 0.0)


def check_monotone(tau, atol: float = 0.0):
    r = rates_from_tau(tau)
    if r.size and (np.any(r < -atol) or not np.all(np.isfinite(r))):
        raise ValueError("tau must be finite and non-increasing down to tau[K+1] = 0")


def powers_from_tau(tau, gains, n0: float) -> np.ndarray:
    """Physical transmit powers that realise ``tau`` under SIC."""
    tau = np.asarray(tau, dtype=float)
    check_monotone(tau, atol=1e-12)
    e = np.exp2(tau)
    return n0 / np.asarray(gains, dtype=float) * (e - np.append(e[1:], 1.0))


SHARE_SPLITS = ("equal", "anchored")


def share_coefficients(gains, n0: float, split: str = "equal"):
    """Per-device exponential coefficients and per-device constants.

    ``split="equal"`` divides the constant ``n0/g_K`` evenly; ``"anchored"``
    gives device m the constant equal to its own coefficient.
    """
    inv_g = 1.0 / np.asarray(gains, dtype=float)
    coef = n0 * (inv_g - np.concatenate([[0.0], inv_g[:-1]]))
    if split == "equal":
        const = np.full(inv_g.size, n0 * inv_g[-1] / inv_g.size) if inv_g.size else np.zeros(0)
    elif split == "anchored":
        const = coef.copy()
    else:
        raise ValueError(f"unknown share split {split!r}")
    return coef, const


def shares_from_tau(tau, gains, n0: float, split: str = "equal") -> np.ndarray:
    tau = np.asarray(tau, dtype=float)
    check_monotone(tau, atol=1e-12)
    coef, const = share_coefficients(gains, n0, split)
    return coef * np.exp2(tau) - const


@dataclass
class CumulativeRates:
    tau: np.ndarray

    @classmethod
    def from_rates(cls, rates_bps, bandwidth: float) -> "CumulativeRates":
        return cls(tau_from_rates(rates_bps, bandwidth))

    def rates(self, bandwidth: float) -> np.ndarray:
        return bandwidth * rates_from_tau(self.tau)

    def physical_powers(self, gains, n0):
        return powers_from_tau(self.tau, gains, n0)

    def shares(self, gains, n0):
        return shares_from_tau(self.tau, gains, n0)


def feasibility_backoff(tau, gains, n0: float, p_max: float):
    """Scale ``tau`` by the largest beta in (0, 1] keeping every physical power <= p_max.

    Returns ``(tau', beta)``; ``beta == 1`` means no backoff was needed.
    Physical powers are nondecreasing in beta, so bisection applies.
    """
    tau = np.asarray(tau, dtype=float)
    if tau.size == 0 or np.max(powers_from_tau(tau, gains, n0)) <= p_max:
        return tau, 1.0
    lo, hi = 0.0, 1.0
    while hi - lo > BACKOFF_TOL:
        mid = 0.5 * (lo + hi)
        if np.max(powers_from_tau(mid * tau, gains, n0)) <= p_max:
            lo = mid
        else:
            hi = mid
    return lo * tau, lo


# ---------------------------------------------------------------- barrier Newton core

@njit(cache=True)
def _barrier_value(tau, coef, const, a, b, v, s, pmax, t):
    K = tau.size
    val = 0.0
    for m in range(K):
        nxt = tau[m + 1] if m + 1 < K else 0.0
        r = tau[m] - nxt
        sl = pmax - (coef[m] * 2.0 ** tau[m] - const[m])
        if r <= 0.0 or sl <= 0.0:
            return np.inf
        sh = pmax - sl
        val += t * (a[m] * sh + b[m] * r - v[m] * math.log1p(s * r)) - math.log(r) - math.log(sl)
    return val


@njit(cache=True)
def _objective(tau, coef, const, a, b, v, s):
    K = tau.size
    val = 0.0
    for m in range(K):
        nxt = tau[m + 1] if m + 1 < K else 0.0
        r = tau[m] - nxt
        val += a[m] * (coef[m] * 2.0 ** tau[m] - const[m]) + b[m] * r - v[m] * math.log1p(s * r)
    return val


@njit(cache=True)
def _grad_hess(tau, coef, const, a, b, v, s, pmax, t, g, d, e):
    K = tau.size
    for m in range(K):
        g[m] = 0.0
        d[m] = 0.0
    for m in range(K - 1):
        e[m] = 0.0
    for m in range(K):
        nxt = tau[m + 1] if m + 1 < K else 0.0
        r = tau[m] - nxt
        q = 1.0 + s * r
        hp = t * (b[m] - v[m] * s / q) - 1.0 / r
        hpp = t * v[m] * s * s / (q * q) + 1.0 / (r * r)
        g[m] += hp
        d[m] += hpp
        if m + 1 < K:
            g[m + 1] -= hp
            d[m + 1] += hpp
            e[m] -= hpp
        ex = coef[m] * 2.0 ** tau[m]
        sl = pmax - (ex - const[m])
        d1 = ex * LN2
        d2 = d1 * LN2
        g[m] += t * a[m] * d1 + d1 / sl
        d[m] += t * a[m] * d2 + d2 / sl + d1 * d1 / (sl * sl)


@njit(cache=True)
def _solve_tridiag(d, e, rhs, out, cp, dp):
    """Thomas algorithm for the symmetric tridiagonal system (diag d, off-diag e)."""
    K = d.size
    if K == 1:
        out[0] = rhs[0] / d[0]
        return
    cp[0] = e[0] / d[0]
    dp[0] = rhs[0] / d[0]
    for i in range(1, K):
        den = d[i] - e[i - 1] * cp[i - 1]
        if i < K - 1:
            cp[i] = e[i] / den
        dp[i] = (rhs[i] - e[i - 1] * dp[i - 1]) / den
    out[K - 1] = dp[K - 1]
    for i in range(K - 2, -1, -1):
        out[i] = dp[i] - cp[i] * out[i + 1]


@njit(cache=True)
def _barrier_newton(tau0, coef, const, a, b, v, s, pmax):
    """Returns (tau, t_final, newton_steps, stages, status); status 0 = ok, 1 = stalled."""
    K = tau0.size
    tau = tau0.copy()
    trial = np.empty(K)
    g = np.empty(K)
    d = np.empty(K)
    e = np.empty(max(K - 1, 1))
    step = np.empty(K)
    rhs = np.empty(K)
    cp = np.empty(K)
    dp = np.empty(K)
    n_con = 2.0 * K

    f0 = _objective(tau, coef, const, a, b, v, s)
    t = n_con / (1.0 + abs(f0))
    steps = 0
    stages = 0
    failed = 0
    while True:
        stages += 1
        phi = _barrier_value(tau, coef, const, a, b, v, s, pmax, t)
        phi_start = phi
        converged = False
        for _ in range(MAX_NEWTON_PER_STAGE):
            _grad_hess(tau, coef, const, a, b, v, s, pmax, t, g, d, e)
            for i in range(K):
                rhs[i] = -g[i]
            _solve_tridiag(d, e, rhs, step, cp, dp)
            slope = 0.0
            for i in range(K):
                slope += g[i] * step[i]
            lam2 = -slope
            if lam2 * 0.5 <= 1e-10:
                converged = True
                break
            st = 1.0
            accepted = False
            for _ls in range(200):
                for i in range(K):
                    trial[i] = tau[i] + st * step[i]
                val = _barrier_value(trial, coef, const, a, b, v, s, pmax, t)
                if val <= phi + ARMIJO_C * st * slope:
                    accepted = True
                    break
                st *= ARMIJO_SHRINK
            if not accepted:
                # no representable decrease left; treat a tiny decrement as convergence
                converged = lam2 * 0.5 <= 1e-6 * max(1.0, abs(phi))
                break
            for i in range(K):
                tau[i] = trial[i]
            phi = val
            steps += 1
        if converged or phi < phi_start:
            failed = 0
        else:
            failed += 1
            if failed >= MAX_FAILED_STAGES:
                return tau, t, steps, stages, 1
        fval = _objective(tau, coef, const, a, b, v, s)
        if n_con / t <= GAP_RTOL * (1.0 + abs(fval)) or stages >= 200:
            return tau, t, steps, stages, 0
        t *= BARRIER_GROWTH


@njit(cache=True)
def _f_grad_hess(tau, coef, a, b, v, s, g, d, e):
    """Gradient and tridiagonal Hessian of the objective alone (no barrier)."""
    K = tau.size
    for m in range(K):
        g[m] = 0.0
        d[m] = 0.0
    for m in range(K - 1):
        e[m] = 0.0
    for m in range(K):
        nxt = tau[m + 1] if m + 1 < K else 0.0
        q = 1.0 + s * (tau[m] - nxt)
        hp = b[m] - v[m] * s / q
        hpp = v[m] * s * s / (q * q)
        g[m] += hp
        d[m] += hpp
        if m + 1 < K:
            g[m + 1] -= hp
            d[m + 1] += hpp
            e[m] -= hpp
        d1 = a[m] * coef[m] * 2.0 ** tau[m] * LN2
        g[m] += d1
        d[m] += d1 * LN2


@njit(cache=True)
def _polish(tau0, coef, const, a, b, v, s, pmax, t):
    """Newton on the objective with a guessed active set held as equalities.

    Constraints whose slack is below ``t**-0.5`` (where the barrier's implied
    multiplier exceeds the slack) are taken as active: a zero rate ties
    ``tau[m]`` to ``tau[m+1]`` and a full share fixes ``tau[m]``.  Tied runs
    are merged into blocks; the reduced Hessian stays tridiagonal.
    Returns ``(tau, ok)``; ``ok`` is False when the guess is inconsistent.
    """
    K = tau0.size
    tau = tau0.copy()
    thr = 1.0 / math.sqrt(t)
    block = np.empty(K, np.int64)
    nb = 0
    for m in range(K):
        if m > 0:
            r_prev = tau[m - 1] - tau[m]
            if not r_prev < thr:
                nb += 1
        block[m] = nb
    nb += 1
    fixed = np.zeros(nb, np.bool_)
    fval = np.zeros(nb)
    bval = np.zeros(nb)
    for m in range(K):
        bval[block[m]] = tau[m]
    # last rate tied to zero pins its block at 0
    if tau[K - 1] < thr:
        fixed[block[K - 1]] = True
        fval[block[K - 1]] = 0.0
    for m in range(K):
        if coef[m] <= 0.0:
            continue
        sl = pmax - (coef[m] * 2.0 ** tau[m] - const[m])
        if sl < thr * pmax:
            target = math.log2((pmax + const[m]) / coef[m])
            k = block[m]
            if fixed[k] and abs(fval[k] - target) > 1e-9 * (1.0 + abs(target)):
                return tau0, False
            fixed[k] = True
            fval[k] = target
    for k in range(nb):
        if fixed[k]:
            bval[k] = fval[k]
    g = np.empty(K)
    d = np.empty(K)
    e = np.empty(max(K - 1, 1))
    G = np.empty(nb)
    D = np.empty(nb)
    E = np.empty(max(nb - 1, 1))
    step = np.empty(nb)
    cp = np.empty(nb)
    dp = np.empty(nb)
    trial_b = np.empty(nb)
    trial = np.empty(K)
    for m in range(K):
        tau[m] = bval[block[m]]
    f_cur = _objective(tau, coef, const, a, b, v, s)
    for _ in range(30):
        _f_grad_hess(tau, coef, a, b, v, s, g, d, e)
        for k in range(nb):
            G[k] = 0.0
            D[k] = 0.0
        for k in range(nb - 1):
            E[k] = 0.0
        for m in range(K):
            G[block[m]] += g[m]
            D[block[m]] += d[m]
        for m in range(K - 1):
            if block[m] == block[m + 1]:
                D[block[m]] += 2.0 * e[m]
            else:
                E[block[m]] += e[m]
        for k in range(nb):
            if fixed[k]:
                G[k] = 0.0
                D[k] = 1.0
                if k > 0:
                    E[k - 1] = 0.0
                if k < nb - 1:
                    E[k] = 0.0
            elif not D[k] > 0.0:
                return tau0, False
        for k in range(nb):
            G[k] = -G[k]
        _solve_tridiag(D, E, G, step, cp, dp)
        dec = 0.0
        for k in range(nb):
            dec += G[k] * step[k]
        if not dec > 0.0 or dec * 0.5 <= 1e-24 * (1.0 + abs(f_cur)):
            break
        st = 1.0
        moved = False
        for _ls in range(60):
            for k in range(nb):
                trial_b[k] = bval[k] + st * step[k]
            for m in range(K):
                trial[m] = trial_b[block[m]]
            ok = True
            for m in range(K):
                nxt = trial[m + 1] if m + 1 < K else 0.0
                if trial[m] - nxt < 0.0 or coef[m] * 2.0 ** trial[m] - const[m] > pmax * (1.0 + 1e-13):
                    ok = False
                    break
            if ok:
                f_new = _objective(trial, coef, const, a, b, v, s)
                if f_new <= f_cur - ARMIJO_C * st * dec:
                    moved = True
                    break
            st *= ARMIJO_SHRINK
        if not moved:
            break
        for k in range(nb):
            bval[k] = trial_b[k]
        for m in range(K):
            tau[m] = trial[m]
        f_cur = f_new
    return tau, True


@dataclass
class BarrierProblem:
    """``min F(tau)`` over monotone tau with anchored ``share_m(tau) <= p_max``; gains sorted descending."""

    gains: np.ndarray
    n0: float
    a: np.ndarray
    b: np.ndarray
    v: np.ndarray
    s: float
    p_max: float

    def __post_init__(self):
        self.gains = np.ascontiguousarray(self.gains, dtype=float)
        for name in ("a", "b", "v"):
            setattr(self, name, np.ascontiguousarray(np.broadcast_to(getattr(self, name), self.gains.shape), dtype=float))
        if np.any(np.diff(self.gains) > 0):
            raise ValueError("gains must be sorted in non-increasing order")
        self.coef, self.const = share_coefficients(self.gains, self.n0, "anchored")

    def objective(self, tau) -> float:
        return float(_objective(np.ascontiguousarray(tau, dtype=float), self.coef, self.const,
                                self.a, self.b, self.v, self.s))

    def objective_rates(self, r) -> float:
        return self.objective(np.cumsum(np.asarray(r, dtype=float)[::-1])[::-1])

    def gradient(self, tau) -> np.ndarray:
        tau = np.asarray(tau, dtype=float)
        r = rates_from_tau(tau)
        dr = self.b - self.v * self.s / (1.0 + self.s * r)
        grad = dr.copy()
        grad[1:] -= dr[:-1]
        grad += self.a * self.coef * np.exp2(tau) * LN2
        return grad

    def feasible(self, tau, strict=False) -> bool:
        tau = np.asarray(tau, dtype=float)
        r = rates_from_tau(tau)
        sh = self.coef * np.exp2(tau) - self.const
        if strict:
            return bool(np.all(r > 0) and np.all(sh < self.p_max))
        return bool(np.all(r >= 0) and np.all(sh <= self.p_max * (1 + 1e-12)))

    def kkt_residual(self, tau, active_tol: float = 1e-7) -> float:
        """Stationarity residual ``min_{lam >= 0} |grad F + sum lam_i grad c_i|``.

        Only constraints with slack below ``active_tol`` may carry a multiplier.
        """
        from scipy.optimize import nnls

        tau = np.asarray(tau, dtype=float)
        K = tau.size
        r = rates_from_tau(tau)
        ex = self.coef * np.exp2(tau)
        slack = self.p_max - (ex - self.const)
        cols = []
        for m in range(K):
            if r[m] <= active_tol:
                c = np.zeros(K)
                c[m] = -1.0
                if m + 1 < K:
                    c[m + 1] = 1.0
                cols.append(c)
            if slack[m] <= active_tol * self.p_max:
                c = np.zeros(K)
                c[m] = ex[m] * LN2
                cols.append(c)
        grad = self.gradient(tau)
        if not cols:
            return float(np.linalg.norm(grad))
        _, res = nnls(np.array(cols).T, -grad)
        return float(res)

    def instance(self) -> dict:
        return {"gains": self.gains.tolist(), "n0": self.n0, "a": self.a.tolist(), "b": self.b.tolist(),
                "v": self.v.tolist(), "s": self.s, "p_max": self.p_max}


@dataclass
class SolveResult:
    tau: np.ndarray
    value: float
    t_final: float
    newton_steps: int
    stages: int
    interior: bool = True


def initial_tau(prob: BarrierProblem):
    K = prob.gains.size
    r = np.full(K, TAU_INIT_RATE)
    for _ in range(80):
        tau = np.cumsum(r[::-1])[::-1]
        if prob.feasible(tau, strict=True):
            return tau
        r *= 0.5
    return None


def solve_barrier(prob: BarrierProblem) -> SolveResult:
    K = prob.gains.size
    if K == 0:
        return SolveResult(np.zeros(0), 0.0, math.inf, 0, 0)
    tau0 = initial_tau(prob)
    if tau0 is None:
        # share caps exclude every positive rate vector; only tau = 0 remains
        z = np.zeros(K)
        return SolveResult(z, prob.objective(z), math.inf, 0, 0, interior=False)
    tau, t, steps, stages, status = _barrier_newton(tau0, prob.coef, prob.const, prob.a, prob.b,
                                                    prob.v, float(prob.s), float(prob.p_max))
    if status != 0:
        raise SolverFailure("barrier Newton stalled for %d consecutive stages" % MAX_FAILED_STAGES,
                            instance=prob.instance())
    value = prob.objective(tau)
    # the barrier leaves an O(1/t) bias; remove it with an active-set Newton polish
    tp, ok = _polish(tau, prob.coef, prob.const, prob.a, prob.b, prob.v, float(prob.s), float(prob.p_max), t)
    if ok and prob.feasible(tp):
        vp = prob.objective(tp)
        if vp <= value + 1e-12 * (1.0 + abs(value)):
            tau, value = tp, vp
    return SolveResult(tau, value, t, int(steps), int(stages))


# ---------------------------------------------------------------- per-slot allocation

@dataclass
class PowerAllocation:
    p_physical: np.ndarray
    p_share: np.ndarray
    rates_bps: np.ndarray
    active_set: np.ndarray
    tau: np.ndarray = field(default_factory=lambda: np.zeros(0))
    beta: float = 1.0
    newton_steps: int = 0

    @property
    def backed_off(self) -> bool:
        return self.beta < 1.0


def h3_coefficients(q_off_hat, q_p_hat, q_bs_hat, weights, cfg):
    """Map hatted queues to the solver's (a, b, v, s) in the configured units."""
    uq = cfg.queue_unit_bits
    a = np.asarray(q_p_hat, dtype=float)
    b = (q_bs_hat - np.asarray(q_off_hat, dtype=float)) * cfg.bandwidth_hz * cfg.delta_t / uq ** 2
    v = cfg.v_param * np.asarray(weights, dtype=float) / cfg.log_scale
    s = cfg.rate_unit_scale * cfg.bandwidth_hz
    return a, b, v, s


def solve_power_allocation(snapshot, q_bs_hat: float, gains, active_set, weights, cfg,
                           p_cap: float | None = None) -> PowerAllocation:
    """Minimise the share-form power subproblem over the active devices.

    ``snapshot`` supplies ``q_off_hat`` and ``q_p_hat``; ``active_set`` lists
    device indices with a nonempty offload queue.  The returned powers have
    been repaired by :func:`feasibility_backoff` against ``p_cap`` (defaults
    to ``cfg.p_max``).
    """
    gains = np.asarray(gains, dtype=float)
    n = gains.size
    p_cap = cfg.p_max if p_cap is None else p_cap
    out = PowerAllocation(np.zeros(n), np.zeros(n), np.zeros(n), np.asarray(active_set, dtype=np.intp))
    act = out.active_set
    if act.size == 0:
        return out
    act = act[np.argsort(-gains[act], kind="stable")]
    out.active_set = act
    a, b, v, s = h3_coefficients(snapshot.q_off_hat[act], snapshot.q_p_hat[act], q_bs_hat,
                                 np.asarray(weights, dtype=float)[act], cfg)
    prob = BarrierProblem(gains[act], cfg.noise_w, a, b, v, s, p_cap)
    res = solve_barrier(prob)
    tau, beta = feasibility_backoff(res.tau, prob.gains, cfg.noise_w, p_cap)
    out.tau = tau
    out.beta = beta
    out.newton_steps = res.newton_steps
    out.p_physical[act] = np.maximum(powers_from_tau(tau, prob.gains, cfg.noise_w), 0.0)
    out.p_share[act] = shares_from_tau(tau, prob.gains, cfg.noise_w, "anchored")
    out.rates_bps[act] = cfg.bandwidth_hz * np.maximum(rates_from_tau(tau), 0.0)
    return out
