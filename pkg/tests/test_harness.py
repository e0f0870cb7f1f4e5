"""Trial runner, sweeps, CSV formatting, validation battery, CLI entry."""
import json
import subprocess
import sys

import numpy as np
import pytest

from flexrs.harness import (
    CSV_HEADER,
    SCHEMES,
    SUMMARY_HEADER,
    convergence_trace,
    format_summary_rows,
    format_trace_rows,
    format_trial_rows,
    run_trial,
    sweep,
    validate_suite,
)
from flexrs.rates import verify_constraints

from conftest import tiny_config

CFG = tiny_config(n_users=3, n_devices=2, r_th_bps_hz=0.3)


def test_unknown_scheme_rejected():
    with pytest.raises(ValueError):
        run_trial(CFG, 0, "tdma")


def test_each_scheme_produces_valid_record():
    for scheme in SCHEMES:
        rec = run_trial(CFG, 0, scheme)
        assert rec.scheme == scheme
        assert rec.seed == 0
        assert rec.config_digest == CFG.digest()
        assert rec.wall_time_s == 0.0
        if not rec.feasible:
            assert rec.sum_device_rate == 0.0
            continue
        assert rec.sum_device_rate >= 0.0
        assert len(rec.user_rates) == CFG.n_users
        assert len(rec.matching) == CFG.n_devices
        beams = [b for b in rec.matching if b >= 0]
        assert len(set(beams)) == len(beams)
        assert verify_constraints(rec.report, CFG, rate_tol=1e-5).passed
        if scheme == "sdma-abs":
            assert rec.selection_bitmask == 0
        # the flexible search records its annealer iterations
        if scheme.startswith("frs"):
            assert rec.iterations >= 1


def test_scheme_hierarchy_holds_per_seed():
    """More freedom can never hurt: flexible >= fixed-on >= fixed-off."""
    compared = 0
    for seed in range(5):
        recs = {s: run_trial(CFG, seed, s)
                for s in ("frs-abs", "rs-abs", "sdma-abs")}
        if not all(r.feasible for r in recs.values()):
            continue
        compared += 1
        assert recs["frs-abs"].sum_device_rate \
            >= recs["rs-abs"].sum_device_rate - 1e-9
        assert recs["rs-abs"].sum_device_rate \
            >= recs["sdma-abs"].sum_device_rate - 1e-9
    assert compared >= 3


def test_trial_determinism():
    a = run_trial(CFG, 4, "frs-abs")
    b = run_trial(CFG, 4, "frs-abs")
    assert a.sum_device_rate == b.sum_device_rate
    assert a.selection_bitmask == b.selection_bitmask
    assert a.matching == b.matching
    assert a.user_rates == b.user_rates


def test_no_devices_is_feasible_zero():
    cfg = tiny_config(n_users=3, n_devices=0)
    rec = run_trial(cfg, 0, "frs-abs")
    assert rec.feasible
    assert rec.sum_device_rate == 0.0
    assert rec.matching == ()


def test_collect_mode_traces():
    rec = run_trial(CFG, 1, "frs-abs", collect=True)
    if not rec.feasible:
        pytest.skip("seed 1 infeasible for the tiny setup")
    assert rec.anneal_trace is not None
    best = np.array(rec.anneal_trace)
    assert np.all(np.diff(best) >= 0.0)
    assert rec.inner_traces is not None
    # the last inner trace is the full-precision re-solve of the winner
    assert rec.inner_traces[-1][-1] == pytest.approx(rec.sum_device_rate,
                                                     abs=1e-6)
    for trace in rec.inner_traces:
        assert np.all(np.diff(np.array(trace)) >= -1e-8)


def test_trace_bundle_matches_trial():
    bundle = convergence_trace(CFG, 1)
    rec = run_trial(CFG, 1, "frs-abs", collect=True)
    assert bundle.final_sum_rate == pytest.approx(rec.sum_device_rate)
    assert bundle.anneal_best == rec.anneal_trace
    assert bundle.inner == rec.inner_traces


def test_sweep_shapes_and_pairing():
    values = [0.2, 0.6]
    schemes = ("frs-abs", "sdma-abs")
    result = sweep(CFG, "r_th", values, n_trials=3, schemes=schemes)
    assert len(result.records) == len(values) * len(schemes) * 3
    assert len(result.summary) == len(values) * len(schemes)

    # paired design: the same seed list appears at every (value, scheme) cell
    seeds = {}
    for rec in result.records:
        seeds.setdefault((rec.axis_value, rec.scheme), []).append(rec.seed)
    seed_lists = list(seeds.values())
    assert all(sl == seed_lists[0] for sl in seed_lists)

    for row in result.summary:
        cell = [r for r in result.records
                if r.scheme == row.scheme and r.axis_value == row.axis_value]
        rates = [r.sum_device_rate for r in cell if r.feasible]
        assert row.n_trials == 3
        assert row.n_infeasible == 3 - len(rates)
        if rates:
            assert row.mean_sum_rate == pytest.approx(float(np.mean(rates)))


def test_sweep_user_axis_caps_devices():
    cfg = tiny_config(n_users=4, n_devices=3)
    result = sweep(cfg, "n_users", [2], n_trials=2, schemes=("frs-abs",))
    for rec in result.records:
        if rec.feasible:
            # 2 users leave only 2 private beams, so at most 2 devices ride
            assert len(rec.matching) == 2


def test_sweep_rejects_unknown_axis():
    with pytest.raises(ValueError):
        sweep(CFG, "power", [1.0], n_trials=1)


def test_trial_csv_format_and_determinism():
    recs = [run_trial(CFG, s, "frs-abs") for s in range(2)]
    text = format_trial_rows(recs)
    again = format_trial_rows([run_trial(CFG, s, "frs-abs") for s in range(2)])
    assert text == again
    lines = text.strip().split("\n")
    assert lines[0] == CSV_HEADER
    assert len(lines) == 3
    for line in lines[1:]:
        cols = line.split(",")
        assert len(cols) == CSV_HEADER.count(",") + 1
        assert cols[0] == "frs-abs"
        assert cols[2] == ""          # no sweep axis on single trials
        assert cols[6] == "0.000000"  # untimed runs pin the wall-time column
        float(cols[3])


def test_summary_csv_format():
    result = sweep(CFG, "r_th", [0.3], n_trials=2, schemes=("sdma-abs",))
    text = format_summary_rows(result.summary)
    lines = text.strip().split("\n")
    assert lines[0] == SUMMARY_HEADER
    assert len(lines) == 2
    cols = lines[1].split(",")
    assert cols[0] == "sdma-abs"
    assert cols[1] == "0.3"
    assert cols[5] == "2"


def test_trace_csv_format():
    bundle = convergence_trace(CFG, 1)
    text = format_trace_rows(bundle)
    lines = text.strip().split("\n")
    assert lines[0] == "kind,step,value"
    kinds = {line.split(",")[0] for line in lines[1:]}
    assert "search_best" in kinds
    assert any(k.startswith("inner_") for k in kinds)
    search_steps = [int(l.split(",")[1]) for l in lines[1:]
                    if l.startswith("search_best")]
    assert search_steps[0] == 1
    assert search_steps == sorted(search_steps)


def test_validate_suite_passes():
    report = validate_suite(CFG, 2)
    assert report.passed, report.checks
    names = [c[0] for c in report.checks]
    for expected in ("zf_nulls", "zf_norms", "aux_tightness",
                     "inner_monotone", "constraints", "scheduler_oracle"):
        assert expected in names


def test_validate_suite_vacuous():
    report = validate_suite(CFG, 0)
    assert report.passed
    assert report.warning is not None


# -- command line ---------------------------------------------------------

def _cli(*argv):
    return subprocess.run(
        [sys.executable, "-m", "flexrs", *argv],
        capture_output=True, text=True, timeout=600)


def _write_cfg(tmp_path, **overrides):
    cfg = tiny_config(**overrides)
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(cfg.to_json_dict()))
    return str(path)


def test_cli_run_and_determinism(tmp_path):
    cfg_path = _write_cfg(tmp_path, n_users=3, n_devices=2, r_th_bps_hz=0.3)
    out1 = tmp_path / "a.csv"
    out2 = tmp_path / "b.csv"
    r1 = _cli("run", "--config", cfg_path, "--seed", "0",
              "--scheme", "frs-abs", "--out", str(out1))
    assert r1.returncode == 0, r1.stderr
    r2 = _cli("run", "--config", cfg_path, "--seed", "0",
              "--scheme", "frs-abs", "--out", str(out2))
    assert r2.returncode == 0
    assert out1.read_bytes() == out2.read_bytes()
    assert out1.read_text().startswith(CSV_HEADER)


def test_cli_sweep(tmp_path):
    cfg_path = _write_cfg(tmp_path, n_users=3, n_devices=2)
    trials = tmp_path / "trials.csv"
    summary = tmp_path / "summary.csv"
    r = _cli("sweep", "--config", cfg_path, "--axis", "r_th",
             "--values", "0.2,0.5", "--trials", "2",
             "--out", str(trials), "--summary-out", str(summary))
    assert r.returncode == 0, r.stderr
    t_lines = trials.read_text().strip().split("\n")
    s_lines = summary.read_text().strip().split("\n")
    assert t_lines[0] == CSV_HEADER
    assert len(t_lines) == 1 + 2 * len(SCHEMES) * 2
    assert s_lines[0] == SUMMARY_HEADER
    assert len(s_lines) == 1 + 2 * len(SCHEMES)


def test_cli_trace(tmp_path):
    cfg_path = _write_cfg(tmp_path, n_users=3, n_devices=2, r_th_bps_hz=0.3)
    out = tmp_path / "trace.csv"
    r = _cli("trace", "--config", cfg_path, "--seed", "1", "--out", str(out))
    assert r.returncode == 0, r.stderr
    assert out.read_text().startswith("kind,step,value")


def test_cli_validate(tmp_path):
    cfg_path = _write_cfg(tmp_path, n_users=3, n_devices=2, r_th_bps_hz=0.3)
    r = _cli("validate", "--config", cfg_path, "--n", "2")
    assert r.returncode == 0, r.stdout + r.stderr
    assert "PASS zf_nulls" in r.stdout
    assert "FAIL" not in r.stdout


def test_cli_bad_config_exit_code(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    r = _cli("run", "--config", str(bad), "--seed", "0")
    assert r.returncode == 2
    assert "config error" in r.stderr

    missing = tmp_path / "nope.json"
    r = _cli("validate", "--config", str(missing))
    assert r.returncode == 2


def test_cli_bad_values_list(tmp_path):
    cfg_path = _write_cfg(tmp_path)
    r = _cli("sweep", "--config", cfg_path, "--axis", "r_th",
             "--values", "a,b", "--trials", "1")
    assert r.returncode == 2
