"""End-to-end experiment runner: inject -> split -> fit -> rank -> select -> ML-KNN -> metrics.

Every (missing ratio, hyperparameter combination, variant, trial) cell is run
independently with seed ``base_seed + trial``; a failing cell is logged and
skipped.  Reports are written with ``repr`` floats so identical configurations
give byte-identical files; timings live only in ``meta.json``.
"""
from __future__ import annotations

import csv
import itertools
import json
import logging
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from .dataset import ViewBlock, load_dataset
from .graph import build_label_graph, empty_graph
from .metrics import METRIC_NAMES, evaluate
from .mlknn import predict_mlknn, train_mlknn
from .optimizer import Hyperparams, fit, write_trace_csv
from .ranking import rank_features, select_subset, write_ranking_csv
from .simulation import (MissingnessSpec, SyntheticSpec, generate_synthetic,
                         inject_missingness, split_indices)

log = logging.getLogger(__name__)

DEFAULT_GRID = (1e-3, 1e-2, 1e-1, 1.0, 1e1, 1e2, 1e3)
DEFAULT_GAMMAS = (2, 3, 4, 5, 6, 7, 8, 9)
DEFAULT_RATIOS = (0.1, 0.2, 0.3, 0.4, 0.5)
REPORT_METRICS = METRIC_NAMES + ("coverage_normalized",)


@dataclass(frozen=True)
class Variant:
    shared_latent: bool = True
    graph: bool = True
    adaptive_weights: bool = True
    select: bool = True

    @property
    def name(self) -> str:
        if not self.select:
            return "all_features"
        off = [tag for tag, on in (("no_shared_latent", self.shared_latent),
                                   ("no_graph", self.graph),
                                   ("no_adaptive_weights", self.adaptive_weights)) if not on]
        return "+".join(off) or "full"


FULL = Variant()
ABLATIONS = (Variant(shared_latent=False), Variant(graph=False),
             Variant(adaptive_weights=False))
BASELINE = Variant(select=False)


@dataclass
class ExperimentConfig:
    manifest: str | None = None
    synthetic: SyntheticSpec = field(default_factory=SyntheticSpec)
    missing_ratios: list = field(default_factory=lambda: list(DEFAULT_RATIOS))
    lam: list = field(default_factory=lambda: list(DEFAULT_GRID))
    eta: list = field(default_factory=lambda: list(DEFAULT_GRID))
    delta: list = field(default_factory=lambda: list(DEFAULT_GRID))
    gamma: list = field(default_factory=lambda: list(DEFAULT_GAMMAS))
    fraction: float = 0.1
    per_view_quota: bool = False
    trials: int = 50
    base_seed: int = 0
    train_fraction: float = 0.7
    graph_q: int = 5
    graph_sigma: float = 1.0
    mlknn_k: int = 10
    mlknn_smoothing: float = 1.0
    max_iters: int = 500
    rel_tol: float = 1e-6
    disable_shared_latent: bool = False
    disable_graph: bool = False
    disable_adaptive_weights: bool = False
    ablation_table: bool = False
    include_baseline: bool = False
    shift_nonneg: bool = False
    standardize: bool = False
    jobs: int = 1

    def __post_init__(self):
        if isinstance(self.synthetic, dict):
            syn = dict(self.synthetic)
            if "dims" in syn:
                syn["dims"] = tuple(syn["dims"])
            self.synthetic = SyntheticSpec(**syn)
        for name in ("missing_ratios", "lam", "eta", "delta", "gamma"):
            val = getattr(self, name)
            if np.isscalar(val):
                setattr(self, name, [val])
            if not getattr(self, name):
                raise ValueError(f"grid '{name}' must not be empty")
        if self.trials < 1:
            raise ValueError("trials must be at least 1")

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)

    @classmethod
    def from_json(cls, path) -> "ExperimentConfig":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def to_dict(self) -> dict:
        d = asdict(self)
        d["synthetic"] = {**asdict(self.synthetic), "dims": list(self.synthetic.dims)}
        return d

    def variants(self) -> list:
        base = Variant(not self.disable_shared_latent, not self.disable_graph,
                       not self.disable_adaptive_weights)
        out = [base]
        if self.ablation_table:
            out = [FULL, *ABLATIONS]
        if self.include_baseline:
            out.append(BASELINE)
        return out

    def hyper_combos(self) -> list:
        return list(itertools.product(self.lam, self.eta, self.delta, self.gamma))


@dataclass
class CellResult:
    cell_id: str
    ratio: float
    lam: float
    eta: float
    delta: float
    gamma: float
    variant: str
    trial: int
    seed: int
    metrics: dict | None = None
    alpha: list | None = None
    traces: list = field(default_factory=list)
    ranking: object = None
    timings: dict = field(default_factory=dict)
    error: str | None = None

    def keys(self) -> dict:
        return {"cell_id": self.cell_id, "ratio": self.ratio, "lam": self.lam,
                "eta": self.eta, "delta": self.delta, "gamma": self.gamma,
                "variant": self.variant, "trial": self.trial, "seed": self.seed}


@dataclass
class ExperimentReport:
    config: dict
    cells: list = field(default_factory=list)
    started: str = ""
    finished: str = ""

    @property
    def ok_cells(self):
        return [c for c in self.cells if c.error is None]

    @property
    def errors(self):
        return [{"cell_id": c.cell_id, "error": c.error} for c in self.cells if c.error]

    def aggregate(self) -> list:
        groups = {}
        for c in self.ok_cells:
            key = (c.ratio, c.lam, c.eta, c.delta, c.gamma, c.variant)
            groups.setdefault(key, []).append(c)
        out = []
        for key, cells in groups.items():
            vals = {m: np.array([c.metrics[m] for c in cells]) for m in REPORT_METRICS}
            out.append({
                "ratio": key[0], "lam": key[1], "eta": key[2], "delta": key[3],
                "gamma": key[4], "variant": key[5], "n_trials": len(cells),
                "mean": {m: float(np.mean(v)) for m, v in vals.items()},
                "std": {m: float(np.std(v, ddof=1)) if v.size > 1 else 0.0
                        for m, v in vals.items()},
            })
        return out

    def mean(self, metric, variant="full", **where) -> float:
        vals = [c.metrics[metric] for c in self.ok_cells if c.variant == variant
                and all(getattr(c, k) == v for k, v in where.items())]
        return float(np.mean(vals)) if vals else float("nan")


def _fmt(x) -> str:
    return format(float(x), "g")


def cell_id(ratio, lam, eta, delta, gamma, variant, trial) -> str:
    return (f"mr{_fmt(ratio)}_lam{_fmt(lam)}_eta{_fmt(eta)}_delta{_fmt(delta)}"
            f"_gamma{_fmt(gamma)}_{variant}_t{trial}")


def load_source(config: ExperimentConfig):
    """Dataset named by the config plus the planted informative rows (or None)."""
    if config.manifest:
        ds = load_dataset(config.manifest, shift_nonneg_rows=config.shift_nonneg,
                          standardize_rows=config.standardize)
        return ds, None
    return generate_synthetic(config.synthetic)


def _fit_q(train, graph, hyper, seed, variant):
    """Projection matrices, final alpha and traces for one variant."""
    if variant.shared_latent:
        model, trace = fit(train, graph, hyper, seed,
                           adaptive_weights=variant.adaptive_weights)
        return model.Q, model.alpha, [trace]
    Q, traces = [], []
    for v in train.views:
        single = replace(train, views=[ViewBlock(0, v.features, v.presence)])
        model, trace = fit(single, graph, hyper, seed)
        Q.append(model.Q[0])
        traces.append(trace)
    return Q, np.full(train.m, 1.0 / train.m), traces


def run_cell(dataset, config: ExperimentConfig, ratio, combo, variant: Variant, trial):
    lam, eta, delta, gamma = combo
    seed = config.base_seed + trial
    res = CellResult(cell_id(ratio, lam, eta, delta, gamma, variant.name, trial),
                     ratio, lam, eta, delta, gamma, variant.name, trial, seed)
    t = {}
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            t0 = time.perf_counter()
            ds = inject_missingness(dataset, MissingnessSpec(ratio, seed))
            tr, te = split_indices(ds.n, config.train_fraction, seed, ds.groups)
            train, test = ds.take(tr), ds.take(te)
            t["prepare"] = time.perf_counter() - t0

            if variant.select:
                t0 = time.perf_counter()
                use_graph = variant.graph and eta > 0
                graph = (build_label_graph(train.labels, config.graph_q, config.graph_sigma)
                         if use_graph else empty_graph(train.n))
                t["graph"] = time.perf_counter() - t0
                hyper = Hyperparams(lam, eta if use_graph else 0.0, delta, gamma,
                                    max_iters=config.max_iters, rel_tol=config.rel_tol)
                t0 = time.perf_counter()
                Q, alpha, traces = _fit_q(train, graph, hyper, seed, variant)
                t["fit"] = time.perf_counter() - t0
                t0 = time.perf_counter()
                ranking = rank_features(Q)
                train = select_subset(train, ranking, config.fraction, config.per_view_quota)
                test = select_subset(test, ranking, config.fraction, config.per_view_quota)
                t["select"] = time.perf_counter() - t0
                res.alpha = [float(a) for a in alpha]
                res.traces = traces
                res.ranking = ranking

            t0 = time.perf_counter()
            clf = train_mlknn(train.instance_matrix(), train.labels,
                              config.mlknn_k, config.mlknn_smoothing)
            pred, conf = predict_mlknn(clf, test.instance_matrix())
            res.metrics = evaluate(pred, conf, test.labels).as_dict()
            t["classify"] = time.perf_counter() - t0
    except Exception as exc:  # one bad cell must not end a sweep
        log.warning("cell %s failed: %s", res.cell_id, exc)
        res.error = f"{type(exc).__name__}: {exc}"
    res.timings = t
    return res


def _run_cell_args(args):
    return run_cell(*args)


def run_experiment(config: ExperimentConfig, dataset=None) -> ExperimentReport:
    """Run every cell of ``config``; ``dataset`` overrides the configured source."""
    started = datetime.now(timezone.utc).isoformat()
    if dataset is None:
        dataset, _ = load_source(config)
    tasks = [(dataset, config, ratio, combo, variant, trial)
             for ratio in config.missing_ratios
             for combo in config.hyper_combos()
             for variant in config.variants()
             for trial in range(config.trials)]
    if config.jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=config.jobs) as pool:
            # map preserves task order, so the merge is independent of scheduling
            cells = list(pool.map(_run_cell_args, tasks, chunksize=4))
    else:
        cells = [run_cell(*task) for task in tasks]
    return ExperimentReport(config.to_dict(), cells, started,
                            datetime.now(timezone.utc).isoformat())


KEY_COLUMNS = ["cell_id", "ratio", "lam", "eta", "delta", "gamma", "variant", "trial", "seed"]


def _key_row(c: CellResult):
    k = c.keys()
    return [k["cell_id"], repr(float(c.ratio)), repr(float(c.lam)), repr(float(c.eta)),
            repr(float(c.delta)), repr(float(c.gamma)), c.variant, c.trial, c.seed]


def emit_reports(report: ExperimentReport, out_dir) -> Path:
    """Write metrics.csv, aggregate.json, alpha.csv, errors.json,
    convergence/*.csv, ranking/*.csv and the meta.json timing sidecar."""
    out = Path(out_dir)
    (out / "convergence").mkdir(parents=True, exist_ok=True)
    (out / "ranking").mkdir(parents=True, exist_ok=True)

    with (out / "metrics.csv").open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(KEY_COLUMNS + ["metric", "value"])
        for c in report.ok_cells:
            for m in REPORT_METRICS:
                w.writerow(_key_row(c) + [m, repr(float(c.metrics[m]))])

    with (out / "alpha.csv").open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(KEY_COLUMNS + ["view", "alpha"])
        for c in report.ok_cells:
            for v, a in enumerate(c.alpha or []):
                w.writerow(_key_row(c) + [v, repr(float(a))])

    for c in report.ok_cells:
        for i, trace in enumerate(c.traces):
            suffix = "" if len(c.traces) == 1 else f"_view{i}"
            write_trace_csv(trace, out / "convergence" / f"{c.cell_id}{suffix}.csv")
        if c.ranking is not None:
            write_ranking_csv(c.ranking, out / "ranking" / f"{c.cell_id}.csv")

    agg = {"metrics": list(REPORT_METRICS), "groups": report.aggregate()}
    (out / "aggregate.json").write_text(json.dumps(agg, indent=2) + "\n")
    (out / "errors.json").write_text(json.dumps(report.errors, indent=2) + "\n")
    (out / "config.json").write_text(json.dumps(report.config, indent=2) + "\n")

    stages = {}
    for c in report.cells:
        for k, v in c.timings.items():
            stages.setdefault(k, []).append(v)
    meta = {
        "started": report.started,
        "finished": report.finished,
        "wall_clock_seconds": {k: {"total": sum(v), "mean": sum(v) / len(v)}
                               for k, v in stages.items()},
        "cells": {c.cell_id: c.timings for c in report.cells},
    }
    (out / "meta.json").write_text(json.dumps(meta, indent=2) + "\n")
    return out


SENSITIVITY_PANELS = (
    # (panel, x parameter, y parameter); the remaining tradeoff stays at 0.1, gamma at 2
    ("lam", "eta", "delta"),
    ("eta", "lam", "delta"),
    ("delta", "lam", "eta"),
    ("gamma", "gamma", "lam"),
)


def sweep_sensitivity(config: ExperimentConfig, fixed_value=0.1, fixed_gamma=2,
                      panels=SENSITIVITY_PANELS, dataset=None):
    """Grid-indexed average-precision tables for parameter sensitivity plots.

    For the ``lam``/``eta``/``delta`` panels that parameter is held at
    ``fixed_value`` with gamma at ``fixed_gamma`` while the other two tradeoff
    parameters run over their grids.  The ``gamma`` panel varies gamma against
    lambda with eta and delta held at ``fixed_value``.
    Returns ``(rows, report)``.
    """
    if dataset is None:
        dataset, _ = load_source(config)
    rows, cells = [], []
    for panel, xp, yp in panels:
        grid = {"lam": [fixed_value], "eta": [fixed_value], "delta": [fixed_value],
                "gamma": [fixed_gamma]}
        grid[xp] = list(getattr(config, xp))
        grid[yp] = list(getattr(config, yp))
        sub = replace(config, **grid)
        rep = run_experiment(sub, dataset)
        cells.extend(rep.cells)
        for g in rep.aggregate():
            if g["variant"] != sub.variants()[0].name:
                continue
            rows.append({
                "panel": panel, "ratio": g["ratio"],
                "lam": g["lam"], "eta": g["eta"], "delta": g["delta"], "gamma": g["gamma"],
                "x_param": xp, "x_value": g[xp], "y_param": yp, "y_value": g[yp],
                "ap_mean": g["mean"]["average_precision"],
                "ap_std": g["std"]["average_precision"], "n_trials": g["n_trials"],
            })
    return rows, ExperimentReport(config.to_dict(), cells)


SWEEP_COLUMNS = ["panel", "ratio", "lam", "eta", "delta", "gamma", "x_param", "x_value",
                 "y_param", "y_value", "ap_mean", "ap_std", "n_trials"]


def write_sweep_csv(rows, path):
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SWEEP_COLUMNS)
        for r in rows:
            w.writerow([repr(r[c]) if isinstance(r[c], float) else r[c] for c in SWEEP_COLUMNS])
