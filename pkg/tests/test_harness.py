import csv
import importlib
import io
import json
import os

import numpy as np
import pytest

from noma_offload import cli
from noma_offload import noma_solver as ns
from noma_offload.config import ConfigError, ScenarioConfig
from noma_offload.simulate import CSV_COLUMNS, atomic_write_text, run_scenario, simulate
from noma_offload.sweep import SWEEP_COLUMNS, ExperimentSpec, aggregate, resolve_param, run_sweep, sweep_table
from noma_offload.verify import suite_transform

SMALL = ScenarioConfig(n_devices=5, horizon=40, seeds=(0, 1))


def _rows(text):
    return list(csv.reader(io.StringIO("".join(l + "\n" for l in text.splitlines() if not l.startswith("#")))))


@pytest.mark.parametrize("kind", ["proposed", "ofdma", "static"])
def test_simulation_is_deterministic(kind):
    cfg = SMALL.with_overrides(scheduler_kind=kind)
    a, b = simulate(cfg, 3), simulate(cfg, 3)
    np.testing.assert_array_equal(a.records.q_off, b.records.q_off)
    np.testing.assert_array_equal(a.records.power, b.records.power)
    assert a.summary == b.summary
    assert not np.array_equal(a.records.q_off, simulate(cfg, 4).records.q_off)


def test_queues_stay_nonnegative_and_caps_hold():
    res = simulate(SMALL.with_overrides(horizon=200), 2)
    r = res.records
    for q in (r.q_loc, r.q_off, r.q_p):
        assert np.all(q >= 0)
    kappa, f_max = 1e-26, 4e8
    assert np.all(r.power <= SMALL.scheduler.p_max + kappa * f_max ** 3 + 1e-9)


def test_partial_knowledge_sends_fewer_reports():
    full = simulate(SMALL.with_overrides(horizon=60), 0).summary
    part = simulate(SMALL.with_overrides(horizon=60, **{"scheduler.feedback_period": 5}), 0).summary
    assert full.feedback_msgs == 60 * 5
    assert part.feedback_msgs == 60
    assert part.knowledge_gap_max_ratio <= 1.0


def test_run_scenario_writes_outputs(tmp_path):
    run_scenario(SMALL, out_dir=tmp_path)
    for seed in SMALL.seeds:
        rows = _rows((tmp_path / f"slots_seed{seed}.csv").read_text())
        assert tuple(rows[0]) == CSV_COLUMNS
        assert len(rows) == 1 + SMALL.horizon
    doc = json.loads((tmp_path / "summary.json").read_text())
    assert doc["seeds"] == [0, 1] and len(doc["runs"]) == 2
    assert not [p for p in os.listdir(tmp_path) if p.endswith(".tmp")]


def test_atomic_write_leaves_old_file_on_failure(tmp_path, monkeypatch):
    target = tmp_path / "out.csv"
    atomic_write_text(target, "old\n")

    def boom(src, dst):
        raise OSError("disk full")

    monkeypatch.setattr(os, "replace", boom)
    with pytest.raises(OSError):
        atomic_write_text(target, "new\n")
    assert target.read_text() == "old\n"
    assert os.listdir(tmp_path) == ["out.csv"]


def test_sweep_table_shape_and_order():
    spec = ExperimentSpec(SMALL, "V", ("0.1", "5"), (0, 1))
    assert spec.param == "scheduler.v_param" and spec.values == (0.1, 5.0)
    results = run_sweep(spec)
    assert [(r.value, r.seed) for r in results] == spec.cells()
    text = sweep_table(spec, results)
    echo = json.loads(text.splitlines()[0][2:])
    assert echo["param"] == "scheduler.v_param"
    rows = _rows(text)
    assert tuple(rows[0]) == SWEEP_COLUMNS
    assert [r[0] for r in rows[1:]] == ["cell"] * 4 + ["mean"] * 2
    agg = aggregate(results, spec.values)
    assert agg[5.0]["n"] == 2


def test_sweep_rejects_bad_parameters():
    with pytest.raises(ConfigError):
        resolve_param("scheduler.nonsense")
    with pytest.raises(ConfigError):
        ExperimentSpec(SMALL, "T", ("0",))
    with pytest.raises(ConfigError):
        ExperimentSpec(SMALL, "V", ())


def test_failed_cell_is_reported_not_fatal(monkeypatch):
    import noma_offload.sweep as sweep_mod

    def explode(cfg, seed):
        raise ns.SolverFailure("stalled", {"seed": seed})

    monkeypatch.setattr(sweep_mod, "simulate", explode)
    spec = ExperimentSpec(SMALL, "V", (1.0,), (0, 1))
    results = run_sweep(spec)
    assert all(r.status == "failed" and "SolverFailure" in r.error for r in results)
    assert "partial(0/2)" in sweep_table(spec, results)


def test_parallel_sweep_matches_serial():
    spec = ExperimentSpec(SMALL.with_overrides(horizon=20), "M", (3, 6), (0, 1))
    assert sweep_table(spec, run_sweep(spec, workers=2)) == sweep_table(spec, run_sweep(spec, workers=1))


# -- command line -------------------------------------------------------------

def _write_cfg(tmp_path, **kw):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps({"n_devices": 4, "horizon": 30, **kw}))
    return path


def test_cli_run_and_sweep(tmp_path, capsys):
    cfg = _write_cfg(tmp_path)
    assert cli.main(["run", "--config", str(cfg), "--seed", "3", "--out", str(tmp_path / "run")]) == 0
    assert (tmp_path / "run" / "slots_seed3.csv").exists()
    out = tmp_path / "sweep.csv"
    assert cli.main(["sweep", "--config", str(cfg), "--param", "T", "--values", "1,3", "--seeds", "2",
                     "--out", str(out)]) == 0
    assert len(_rows(out.read_text())) == 1 + 4 + 2


def test_cli_config_error_exit_code(tmp_path, capsys):
    cfg = _write_cfg(tmp_path, n_devices=0)
    assert cli.main(["run", "--config", str(cfg)]) == 1
    assert "n_devices" in capsys.readouterr().err
    assert cli.main(["sweep", "--config", str(_write_cfg(tmp_path)), "--param", "bogus", "--values", "1"]) == 1


def test_cli_solver_failure_exit_code(tmp_path, monkeypatch, capsys):
    sim_mod = importlib.import_module("noma_offload.simulate")

    def stall(*a, **k):
        raise ns.SolverFailure("stalled", {"gains": [1.0]})

    monkeypatch.setattr(sim_mod, "solve_power_allocation", stall)
    assert cli.main(["run", "--config", str(_write_cfg(tmp_path))]) == 3
    err = capsys.readouterr().err
    assert '"gains"' in err and '"slot"' in err


def test_preset_is_byte_identical(tmp_path):
    args = ["preset", "fig4", "--horizon", "25", "--seeds", "2", "--devices", "4"]
    assert cli.main(args + ["--out", str(tmp_path / "a")]) == 0
    assert cli.main(args + ["--out", str(tmp_path / "b")]) == 0
    names = sorted(os.listdir(tmp_path / "a"))
    assert names == sorted(os.listdir(tmp_path / "b")) and len(names) == 4
    for n in names:
        assert (tmp_path / "a" / n).read_bytes() == (tmp_path / "b" / n).read_bytes()


def test_mutation_canary(monkeypatch, capsys):
    # flip the sign of the share coefficients: the transform oracle must notice
    original = ns.share_coefficients

    def flipped(gains, n0, split="equal"):
        coef, const = original(gains, n0, split)
        return -coef, const

    monkeypatch.setattr(ns, "share_coefficients", flipped)
    assert not suite_transform(n=200).passed
    monkeypatch.setattr("noma_offload.verify.QUICK_SUITES", (lambda: suite_transform(n=200),))
    assert cli.main(["verify"]) == 2
