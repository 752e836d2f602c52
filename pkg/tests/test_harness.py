import json

import numpy as np
import pytest

import dfsdca.cli as cli
import dfsdca.harness as harness
from dfsdca.harness import (
    ExperimentConfig,
    crossing_point,
    load_dataset,
    median_gap_trace,
    run_experiment,
    verify_mode,
)
from dfsdca.solver import Trace

SMALL = dict(
    data="synthetic:chisq10:150:30:0.4",
    loss="logistic",
    taus=(1, 3),
    variants=("nice", "imp"),
    epochs=60.0,
    seeds=(0, 1),
    target_gap=1e-8,
)


def make_trace(passes, gaps):
    it = np.asarray(passes) * 10
    return Trace(
        iterations=it,
        effective_passes=np.asarray(passes, dtype=float),
        gap=np.asarray(gaps, dtype=float),
        potential=np.full(len(gaps), np.nan),
        drift=np.zeros(len(gaps)),
    )


def test_crossing_point_interpolates_in_log_space():
    passes = np.array([0.0, 1.0, 2.0])
    gaps = np.array([1e-2, 1e-4, 1e-8])
    assert crossing_point(passes, gaps, 1e-6) == pytest.approx(1.5)
    assert crossing_point(passes, gaps, 1e-4) == pytest.approx(1.0)
    assert crossing_point(passes, gaps, 1e-1) == pytest.approx(0.0)
    assert crossing_point(passes, gaps, 1e-12) is None


def test_crossing_point_flat_segment():
    passes = np.array([0.0, 1.0, 2.0])
    gaps = np.array([1e-2, 1e-5, 1e-5])
    assert crossing_point(passes, gaps, 1e-5) == pytest.approx(1.0)


def test_median_gap_trace_pads_short_runs():
    a = make_trace([0, 1, 2, 3], [1.0, 0.1, 0.01, 0.001])
    b = make_trace([0, 1], [1.0, 0.05])  # stopped early, carried at 0.05
    passes, med = median_gap_trace([a, b])
    np.testing.assert_array_equal(passes, [0, 1, 2, 3])
    np.testing.assert_allclose(med, [1.0, 0.075, 0.03, 0.0255])


def test_load_dataset_synthetic_and_errors(tmp_path):
    ds, label = load_dataset("synthetic:uniform:50:10:0.5", 3)
    assert ds.n == 50 and label == "synthetic-uniform-50-10-0.5"
    with pytest.raises(ValueError):
        load_dataset("synthetic:uniform:50:10")
    path = tmp_path / "tiny.txt"
    path.write_text("+1 1:1\n-1 2:1\n", encoding="utf-8")
    ds2, label2 = load_dataset(str(path))
    assert ds2.n == 2 and label2.endswith("tiny.txt")


def test_config_json_round_trip():
    cfg = ExperimentConfig(data="x", out="y", taus=(1, 2), seeds=(0,))
    again = ExperimentConfig.from_json_dict(
        json.loads(json.dumps(cfg.to_json_dict()))
    )
    assert again == cfg


def test_run_experiment_outputs(tmp_path):
    cfg = ExperimentConfig(out=str(tmp_path / "run"), **SMALL)
    result = run_experiment(cfg)
    assert not result.all_seeds_diverged
    assert len(result.rows) == 2
    for row in result.rows:
        assert row.status == "ok"
        assert row.empirical_ratio is not None and row.empirical_ratio > 0
        assert row.theoretical_ratio >= 1.0

    out = tmp_path / "run"
    for name in ("ratios.csv", "ratios.json", "config.json", "bundles.json",
                 "runs.json", "summary.json"):
        assert (out / name).exists(), name
    csv = (out / "ratios.csv").read_text().strip().splitlines()
    assert csv[0].startswith("dataset,tau,")
    assert len(csv) == 3
    traces = sorted((out / "traces").iterdir())
    assert len(traces) == 2 * 2 * 2  # taus x variants x seeds
    header = traces[0].read_text().splitlines()[0]
    assert header == "effective_passes,gap,potential"

    # theoretical ratios must be recomputable from the stored bundles
    bundles = json.loads((out / "bundles.json").read_text())
    for row in result.rows:
        want = bundles[f"tau{row.tau}.imp"]["theta"] / bundles[f"tau{row.tau}.nice"]["theta"]
        assert row.theoretical_ratio == pytest.approx(want, rel=1e-12)

    runs = json.loads((out / "runs.json").read_text())
    assert len(runs) == 8 and all(not r["diverged"] for r in runs)


def test_run_experiment_is_reproducible(tmp_path):
    cfg_a = ExperimentConfig(out=str(tmp_path / "a"), **SMALL)
    cfg_b = ExperimentConfig(out=str(tmp_path / "b"), **SMALL)
    run_experiment(cfg_a)
    run_experiment(cfg_b)
    for name in ("ratios.csv", "ratios.json", "bundles.json", "runs.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    for fa in sorted((tmp_path / "a" / "traces").iterdir()):
        fb = tmp_path / "b" / "traces" / fa.name
        assert fa.read_bytes() == fb.read_bytes()


def test_verify_mode_passes_on_small_instance():
    ok, lines = verify_mode("synthetic:chisq1:24:6:0.5", 3, trials=40)
    assert ok
    assert all(line.startswith("PASS") for line in lines)


def test_cli_summary_and_verify(capsys):
    assert cli.main(["summary", "--data", "synthetic:uniform:40:8:0.5"]) == 0
    out = capsys.readouterr().out
    assert "n: 40" in out
    assert cli.main(
        ["verify", "--data", "synthetic:uniform:20:5:0.5", "--tau", "2",
         "--trials", "20"]
    ) == 0


def test_cli_run_and_exit_codes(tmp_path, capsys, monkeypatch):
    rc = cli.main(
        ["run", "--data", "synthetic:chisq10:100:20:0.4", "--out",
         str(tmp_path / "o"), "--taus", "1,2", "--variants", "nice,imp",
         "--epochs", "40", "--seeds", "2", "--gap", "1e-6"]
    )
    assert rc == 0
    assert (tmp_path / "o" / "ratios.csv").exists()
    assert "tau=1" in capsys.readouterr().out

    # usage errors map to 1, not argparse's default 2
    assert cli.main(["run"]) == 1
    assert cli.main(["frobnicate"]) == 1
    assert cli.main(["run", "--data", "synthetic:bad", "--out", "x"]) == 1
    assert cli.main(["verify", "--data", "synthetic:uniform:10:3:0.5",
                     "--tau", "99"]) == 1

    # a failing verification reports 2
    monkeypatch.setattr(harness, "verify_mode", lambda *a, **k: (False, ["FAIL x"]))
    monkeypatch.setattr(cli, "verify_mode", lambda *a, **k: (False, ["FAIL x"]))
    assert cli.main(["verify", "--data", "synthetic:uniform:10:3:0.5",
                     "--tau", "2"]) == 2

    # all seeds diverging in some cell reports 3
    class Boom:
        label = "x"
        summary = {"n": 1, "d": 1}
        rows = ()
        out_dir = "x"
        all_seeds_diverged = True

    monkeypatch.setattr(cli, "run_experiment", lambda cfg: Boom())
    assert cli.main(["run", "--data", "d", "--out", "o"]) == 3


def test_cli_config_file(tmp_path):
    cfg = ExperimentConfig(out=str(tmp_path / "c"), **SMALL)
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(cfg.to_json_dict()), encoding="utf-8")
    assert cli.main(["run", "--config", str(path)]) == 0
    assert (tmp_path / "c" / "ratios.csv").exists()
    # --config excludes inline data flags
    assert cli.main(["run", "--config", str(path), "--data", "zzz"]) == 1
