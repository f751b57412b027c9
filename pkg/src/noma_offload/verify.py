"""Self-check: every reference oracle, run against the production code.

``quick`` finishes in well under a minute; ``full`` adds the solve-time
scaling fit and short V / T trend runs.
"""
from __future__ import annotations

import json
import math
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from . import noma_solver as ns
from . import oracles
from .config import ScenarioConfig, SchedulerConfig
from .env import PATHLOSS_COEF
from .scheduler import decide_cpu_frequency, decide_offloading, drift_penalty_bound_B
from .simulate import simulate

N0 = 1e-9


@dataclass
class SuiteResult:
    name: str
    passed: bool
    checked: int
    failures: list = field(default_factory=list)
    detail: str = ""
    seconds: float = 0.0


# ---------------------------------------------------------------- instance generators

def random_gains(rng, k: int, distance_range=(10.0, 100.0)) -> np.ndarray:
    d = rng.uniform(*distance_range, size=k)
    g = PATHLOSS_COEF * d ** -2 * rng.exponential(1.0, size=k)
    return np.sort(g)[::-1]


def random_power_problem(rng, k: int, cfg: SchedulerConfig | None = None) -> ns.BarrierProblem:
    """A solver instance with coefficients in the ranges seen during simulation."""
    cfg = cfg or SchedulerConfig()
    g = random_gains(rng, k)
    weights = rng.integers(0, 11, size=k).astype(float)
    a, b, v, s = ns.h3_coefficients(rng.uniform(0, 1e4, k), rng.uniform(0, 1.0, k), rng.uniform(0, 2e7),
                                    weights, cfg)
    return ns.BarrierProblem(g, cfg.noise_w, a, b, v, s, cfg.p_max)


# ---------------------------------------------------------------- suites

def suite_h1_enumeration(n: int = 1000, seed: int = 1) -> SuiteResult:
    rng = np.random.default_rng(seed)
    fails = []
    for i in range(n):
        m = int(rng.integers(1, 11))
        q_off = rng.uniform(0, 1e4, m)
        q_loc = rng.uniform(0, 1e4, m)
        # exercise the tie branch
        tie = rng.random(m) < 0.2
        q_loc[tie] = q_off[tie]
        arr = rng.uniform(0, 1e4, m)
        rho = decide_offloading(q_off, q_loc)
        best, _, _ = oracles.h1_enumerate(q_off, q_loc, arr)
        val = oracles.h1_value(rho, q_off, q_loc, arr)
        if val > best + oracles.h1_tolerance(q_off, q_loc, arr):
            fails.append({"instance": i, "value": val, "min": best})
    return SuiteResult("h1_enumeration", not fails, n, fails)


def suite_h2_grid(n: int = 1000, seed: int = 2) -> SuiteResult:
    rng = np.random.default_rng(seed)
    cfg = SchedulerConfig()
    fails = []
    for i in range(n):
        q_loc = rng.uniform(0, 5e4)
        q_p = 0.0 if rng.random() < 0.05 else rng.uniform(0, 2.0)
        f_max, kappa, c = 4e8, 1e-26, 6400.0
        f = decide_cpu_frequency(q_loc, q_p, f_max, kappa, c, cfg)
        got = float(oracles.h2_device(f, q_loc, q_p, kappa, c, cfg.delta_t, cfg.queue_unit_bits))
        best, bound = oracles.h2_grid(q_loc, q_p, f_max, kappa, c, cfg.delta_t, cfg.queue_unit_bits)
        if got > best + bound + 1e-15:
            fails.append({"instance": i, "value": got, "grid_min": best, "bound": bound})
    return SuiteResult("h2_grid", not fails, n, fails)


def suite_solver_grid(n: int = 200, seed: int = 3) -> SuiteResult:
    rng = np.random.default_rng(seed)
    fails = []
    for i in range(n):
        prob = random_power_problem(rng, 2)
        res = ns.solve_barrier(prob)
        val = oracles.power_objective(ns.rates_from_tau(res.tau), prob.gains, prob.n0, prob.a, prob.b, prob.v, prob.s)
        best, _, tol = oracles.two_device_grid(prob.gains, prob.n0, prob.a, prob.b, prob.v, prob.s, prob.p_max)
        if val > best + tol or not prob.feasible(res.tau):
            fails.append({"instance": prob.instance(), "value": val, "grid_min": best, "tol": tol})
    return SuiteResult("solver_grid_m2", not fails, n, fails)


def suite_solver_bisection(n: int = 100, seed: int = 4) -> SuiteResult:
    rng = np.random.default_rng(seed)
    fails = []
    worst = 0.0
    for i in range(n):
        prob = random_power_problem(rng, 1)
        res = ns.solve_barrier(prob)
        x = oracles.single_device_optimum(prob.gains[0], prob.n0, prob.a[0], prob.b[0], prob.v[0], prob.s, prob.p_max)
        err = abs(float(res.tau[0]) - x)
        worst = max(worst, err)
        if err > 1e-6:
            fails.append({"instance": prob.instance(), "tau": float(res.tau[0]), "bisection": x})
    return SuiteResult("solver_bisection_1d", not fails, n, fails, f"max |tau - tau_ref| = {worst:.2e}")


def suite_transform(n: int = 10_000, seed: int = 5) -> SuiteResult:
    rng = np.random.default_rng(seed)
    fails = []
    worst = [0.0, 0.0, 0.0]
    for i in range(n):
        k = int(rng.integers(1, 9))
        g = random_gains(rng, k)
        tau = oracles.random_monotone_tau(rng, k)
        errs = oracles.transform_errors(tau, g, N0)
        worst = [max(w, e) for w, e in zip(worst, errs)]
        if max(errs) > 1e-10:
            fails.append({"instance": i, "errors": list(errs)})
            if len(fails) >= 20:
                break
    detail = "max rel err: rate %.1e, power %.1e, share sum %.1e" % tuple(worst)
    return SuiteResult("transform_identities", not fails, n, fails, detail)


def suite_worked_examples() -> SuiteResult:
    checks = []
    r = ns.sic_rates([1.0, 1.0], [2.0, 1.0], 1.0, 1.0)
    checks.append(("sic (2,1)", np.allclose(r, [1.0, 1.0], rtol=0, atol=1e-12)))
    p = ns.powers_from_tau([2.0, 1.0], [2.0, 1.0], 1.0)
    sh = ns.shares_from_tau([2.0, 1.0], [2.0, 1.0], 1.0)
    checks.append(("powers (2,1)", np.allclose(p, [1.0, 1.0], atol=1e-12)))
    checks.append(("shares (2,1)", np.allclose(sh, [1.5, 0.5], atol=1e-12)))
    tau, beta = ns.feasibility_backoff([2.0], [1.0], 1.0, 1.0)
    checks.append(("backoff beta", abs(beta - 0.5) <= 1e-6))
    fails = [name for name, ok in checks if not ok]
    return SuiteResult("worked_examples", not fails, len(checks), fails)


def suite_knowledge_gap(horizon: int = 400, seed: int = 6) -> SuiteResult:
    fails = []
    checked = 0
    for T in (5, 10):
        cfg = ScenarioConfig(n_devices=10, horizon=horizon).with_overrides(**{"scheduler.feedback_period": T})
        res = simulate(cfg, seed)
        ratios = res.records.knowledge_gap[:len(res.records)]
        checked += ratios.size
        bad = np.flatnonzero(ratios > 1.0)
        if bad.size:
            fails.append({"T": T, "slots": bad[:10].tolist(), "max_ratio": float(ratios.max())})
    return SuiteResult("knowledge_gap_monitor", not fails, checked, fails)


def suite_power_budget(horizon: int = 3000, seed: int = 7) -> SuiteResult:
    cfg = ScenarioConfig(n_devices=10, horizon=horizon)
    res = simulate(cfg, seed)
    p = np.asarray(res.summary.power_per_device_w)
    limit = 1.05 * cfg.scheduler.p_ave
    bad = np.flatnonzero(p > limit)
    fails = [{"device": int(m), "avg_power": float(p[m]), "limit": limit} for m in bad]
    return SuiteResult("power_budget", not fails, p.size, fails, f"max average power {p.max():.4f} W")


def suite_b_constant() -> SuiteResult:
    checks = [
        (drift_penalty_bound_B(1.0, 1.0, 1.0, 1.0, 1.0), 4.0),
        (drift_penalty_bound_B(1.0, [1.0, 1.0], 1.0, 1.0, 1.0), 7.5),
        (drift_penalty_bound_B(0.0, 0.0, 0.0, 0.0, 0.0), 0.0),
        (drift_penalty_bound_B([1.0, 2.0], [0.0, 0.0], [0.0, 0.0], 0.0, 2.0), 7.0),
    ]
    fails = [{"got": got, "want": want} for got, want in checks if abs(got - want) > 1e-12]
    return SuiteResult("b_constant", not fails, len(checks), fails)


# ---------------------------------------------------------------- full-level extras

def solve_time_scaling(sizes=(8, 16, 32, 64, 128, 256, 512), reps: int = 15, seed: int = 8):
    """Median ``solve_barrier`` wall time per size and the fitted log-log exponent."""
    rng = np.random.default_rng(seed)
    ns.solve_barrier(random_power_problem(rng, 4))  # compile outside the timing
    med = []
    for k in sizes:
        times = []
        for _ in range(reps):
            prob = random_power_problem(rng, k)
            t0 = time.perf_counter()
            ns.solve_barrier(prob)
            times.append(time.perf_counter() - t0)
        med.append(float(np.median(times)))
    slope = float(np.polyfit(np.log(sizes), np.log(med), 1)[0])
    return slope, med


def suite_complexity() -> SuiteResult:
    slope, med = solve_time_scaling()
    ok = 1.0 <= slope <= 2.2
    return SuiteResult("complexity_fit", ok, len(med), [] if ok else [{"exponent": slope}],
                       f"exponent {slope:.2f}; medians (ms) " + ", ".join(f"{m * 1e3:.3g}" for m in med))


def _trend(param, values, horizon, seeds, **base):
    out = []
    for v in values:
        cfg = ScenarioConfig(n_devices=10, horizon=horizon).with_overrides(**{**base, param: v})
        u = [simulate(cfg, s).summary.mean_utility for s in seeds]
        out.append((float(np.mean(u)), float(np.std(u, ddof=1) / math.sqrt(len(u)))))
    return out


def suite_v_trend() -> SuiteResult:
    vals = (0.1, 1.0, 5.0, 20.0)
    stats = _trend("scheduler.v_param", vals, 1500, (0, 1, 2))
    fails = [{"V": (vals[i], vals[i + 1]), "utility": (stats[i][0], stats[i + 1][0])}
             for i in range(len(vals) - 1) if stats[i + 1][0] < stats[i][0] - stats[i + 1][1] - stats[i][1]]
    return SuiteResult("v_trend", not fails, len(vals), fails, str([round(m, 2) for m, _ in stats]))


def suite_t_trend() -> SuiteResult:
    vals = (1, 5, 10, 20)
    stats = _trend("scheduler.feedback_period", vals, 1500, (0, 1, 2), **{"scheduler.v_param": 20.0})
    fails = [{"T": (vals[i], vals[i + 1]), "utility": (stats[i][0], stats[i + 1][0])}
             for i in range(len(vals) - 1) if stats[i + 1][0] > stats[i][0] + stats[i + 1][1] + stats[i][1]]
    return SuiteResult("t_trend", not fails, len(vals), fails, str([round(m, 2) for m, _ in stats]))


QUICK_SUITES = (suite_h1_enumeration, suite_h2_grid, suite_solver_grid, suite_solver_bisection, suite_transform,
                suite_worked_examples, suite_knowledge_gap, suite_power_budget, suite_b_constant)
FULL_SUITES = QUICK_SUITES + (suite_complexity, suite_v_trend, suite_t_trend)


def run_verify(level: str = "quick") -> list[SuiteResult]:
    suites = {"quick": QUICK_SUITES, "full": FULL_SUITES}[level]
    out = []
    for fn in suites:
        t0 = time.perf_counter()
        try:
            res = fn()
        except Exception as exc:  # an oracle that crashes counts as a failure
            res = SuiteResult(fn.__name__.removeprefix("suite_"), False, 0, [f"{type(exc).__name__}: {exc}"])
        res.seconds = time.perf_counter() - t0
        out.append(res)
    return out


def report(results: list[SuiteResult]) -> str:
    lines = []
    for r in results:
        mark = "PASS" if r.passed else "FAIL"
        extra = f"  {r.detail}" if r.detail else ""
        lines.append(f"{mark} {r.name:<22} {r.checked:>6} checked  {r.seconds:6.2f}s{extra}")
    failed = [asdict(r) for r in results if not r.passed]
    lines.append("failures: " + json.dumps(failed, default=str))
    return "\n".join(lines)
