import csv
import json

import numpy as np
import pytest

from aslsl.harness import (FULL, ExperimentConfig, ExperimentReport, emit_reports,
                           run_cell, run_experiment, sweep_sensitivity, write_sweep_csv)
from aslsl.simulation import SyntheticSpec, generate_synthetic

TINY = SyntheticSpec(n=50, m=2, k=2, dims=(10, 10), informative_per_view=2, seed=1)


def tiny_config(**kw):
    base = dict(synthetic=TINY, missing_ratios=[0.2], lam=[1.0], eta=[1.0], delta=[1.0],
                gamma=[2.0], trials=2, max_iters=30, mlknn_k=3)
    base.update(kw)
    return ExperimentConfig(**base)


def test_single_cell_produces_metrics():
    ds, _ = generate_synthetic(TINY)
    cell = run_cell(ds, tiny_config(), 0.2, (1.0, 1.0, 1.0, 2.0), FULL, 0)
    assert cell.error is None
    assert 0 <= cell.metrics["average_precision"] <= 1
    assert sum(cell.alpha) == pytest.approx(1.0)
    assert {"prepare", "fit", "classify"} <= set(cell.timings)


def test_failed_cell_is_isolated():
    cfg = tiny_config(mlknn_k=500, trials=1)
    report = run_experiment(cfg)
    assert len(report.errors) == 1 and not report.ok_cells
    assert "k_neighbors" in report.errors[0]["error"]


def test_ablation_variants_present():
    cfg = tiny_config(trials=1, ablation_table=True, include_baseline=True)
    names = {c.variant for c in run_experiment(cfg).cells}
    assert names == {"full", "no_shared_latent", "no_graph", "no_adaptive_weights",
                     "all_features"}


def test_aggregate_matches_recomputation():
    report = run_experiment(tiny_config(trials=3))
    (group,) = report.aggregate()
    vals = np.array([c.metrics["hamming_loss"] for c in report.ok_cells])
    assert abs(group["mean"]["hamming_loss"] - vals.mean()) <= 1e-12
    assert abs(group["std"]["hamming_loss"] - vals.std(ddof=1)) <= 1e-12


def test_emitted_files(tmp_path):
    report = run_experiment(tiny_config())
    emit_reports(report, tmp_path)
    rows = list(csv.DictReader((tmp_path / "metrics.csv").open()))
    assert len(rows) == 2 * 7
    for c in report.ok_cells:
        conv = list(csv.reader((tmp_path / "convergence" / f"{c.cell_id}.csv").open()))
        assert len(conv) - 1 == c.traces[0].iterations_run
        assert (tmp_path / "ranking" / f"{c.cell_id}.csv").exists()
    assert json.loads((tmp_path / "errors.json").read_text()) == []
    assert "wall_clock_seconds" in json.loads((tmp_path / "meta.json").read_text())


def test_empty_report_writes_headers_only(tmp_path):
    emit_reports(ExperimentReport(config={}), tmp_path)
    lines = (tmp_path / "metrics.csv").read_text().splitlines()
    assert len(lines) == 1 and lines[0].startswith("cell_id")
    assert len((tmp_path / "alpha.csv").read_text().splitlines()) == 1


def test_runs_are_deterministic(tmp_path):
    for name in ("a", "b"):
        emit_reports(run_experiment(tiny_config()), tmp_path / name)
    for f in ("metrics.csv", "alpha.csv", "aggregate.json"):
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()


def test_parallel_matches_serial():
    a = run_experiment(tiny_config(jobs=1))
    b = run_experiment(tiny_config(jobs=2))
    assert [c.metrics for c in a.cells] == [c.metrics for c in b.cells]


def test_sensitivity_panel_shape(tmp_path):
    grid = [0.01, 0.1, 1.0]
    cfg = tiny_config(trials=1, lam=grid, eta=grid, delta=grid, gamma=[2.0, 3.0],
                      max_iters=10)
    rows, report = sweep_sensitivity(cfg, panels=(("lam", "eta", "delta"),))
    assert len(rows) == 9
    assert {r["lam"] for r in rows} == {0.1}
    assert {r["gamma"] for r in rows} == {2}
    assert all(0 <= r["ap_mean"] <= 1 for r in rows)
    write_sweep_csv(rows, tmp_path / "s.csv")
    assert len((tmp_path / "s.csv").read_text().splitlines()) == 10


def test_config_round_trip(tmp_path):
    cfg = tiny_config()
    path = tmp_path / "c.json"
    path.write_text(json.dumps(cfg.to_dict()))
    assert ExperimentConfig.from_json(path) == cfg
    with pytest.raises(ValueError, match="unknown"):
        ExperimentConfig.from_dict({"bogus": 1})
