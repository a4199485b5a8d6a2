"""Command line entry point: ``aslsl <verb> [options]``.

Verbs: generate, inject, fit, rank, evaluate, run, sweep.  Fatal errors are
printed to stderr as a JSON object and the process exits with status 1.
The default output directory comes from ``$ASLSL_OUTPUT_DIR`` (else ``./aslsl-out``).
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .dataset import load_dataset, save_dataset
from .graph import DEFAULT_Q, DEFAULT_SIGMA, build_label_graph
from .harness import (ExperimentConfig, emit_reports, run_experiment, sweep_sensitivity,
                      write_sweep_csv)
from .metrics import evaluate as evaluate_metrics
from .mlknn import predict_mlknn, train_mlknn
from .optimizer import AslslModel, Hyperparams, fit, write_trace_csv
from .ranking import rank_features, read_ranking_csv, select_subset, write_ranking_csv
from .simulation import (MissingnessSpec, SyntheticSpec, generate_synthetic,
                         inject_missingness, split_subjects)

ENV_OUTPUT = "ASLSL_OUTPUT_DIR"


def default_out() -> Path:
    return Path(os.environ.get(ENV_OUTPUT, "aslsl-out"))


def _floats(text):
    return [float(x) for x in text.split(",") if x]


def _ints(text):
    return [int(x) for x in text.split(",") if x]


def _add_load_flags(p):
    p.add_argument("--manifest", required=True, help="dataset manifest (JSON)")
    p.add_argument("--shift-nonneg", action="store_true",
                   help="shift each feature row by its minimum instead of rejecting negatives")
    p.add_argument("--standardize", action="store_true",
                   help="min-max scale each feature row to [0, 1]")


def _add_hyper_flags(p):
    p.add_argument("--lam", type=float, default=1.0)
    p.add_argument("--eta", type=float, default=1.0)
    p.add_argument("--delta", type=float, default=1.0)
    p.add_argument("--gamma", type=float, default=2.0)
    p.add_argument("--max-iters", type=int, default=500)
    p.add_argument("--rel-tol", type=float, default=1e-6)
    p.add_argument("--graph-q", type=int, default=DEFAULT_Q)
    p.add_argument("--graph-sigma", type=float, default=DEFAULT_SIGMA)


def _load(args):
    return load_dataset(args.manifest, shift_nonneg_rows=args.shift_nonneg,
                        standardize_rows=args.standardize)


def cmd_generate(args):
    dims = tuple(_ints(args.dims)) if args.dims else (args.d,) * args.m
    spec = SyntheticSpec(n=args.n, m=len(dims), k=args.k, dims=dims,
                         informative_per_view=args.informative,
                         noise_level=args.noise, seed=args.seed)
    ds, informative = generate_synthetic(spec)
    path = save_dataset(ds, args.out)
    (Path(args.out) / "informative.json").write_text(
        json.dumps({str(v): idx.tolist() for v, idx in enumerate(informative)}) + "\n")
    return {"manifest": str(path), "n": ds.n, "m": ds.m, "k": ds.k, "dims": ds.dims}


def cmd_inject(args):
    ds = _load(args)
    out = inject_missingness(ds, MissingnessSpec(args.ratio, args.seed))
    path = save_dataset(out, args.out)
    absent = (~out.masks).sum(axis=1).tolist()
    return {"manifest": str(path), "absent_per_view": absent}


def cmd_fit(args):
    ds = _load(args)
    hyper = Hyperparams(args.lam, args.eta, args.delta, args.gamma,
                        max_iters=args.max_iters, rel_tol=args.rel_tol)
    graph = build_label_graph(ds.labels, args.graph_q, args.graph_sigma)
    model, trace = fit(ds, graph, hyper, args.seed,
                       adaptive_weights=not args.fixed_alpha)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    np.savez(out / "model.npz", U=model.U, M=model.M, alpha=model.alpha,
             **{f"Q{v}": q for v, q in enumerate(model.Q)})
    write_trace_csv(trace, out / "convergence.csv")
    write_ranking_csv(rank_features(model), out / "ranking.csv")
    return {"model": str(out / "model.npz"), "iterations": trace.iterations_run,
            "converged": trace.converged, "objective": trace.objective_values[-1],
            "alpha": model.alpha.tolist()}


def _load_model(path):
    data = np.load(path)
    nq = sum(1 for k in data.files if k.startswith("Q"))
    Q = [data[f"Q{v}"] for v in range(nq)]
    return AslslModel(Q, data["U"], data["M"], data["alpha"], Hyperparams())


def cmd_rank(args):
    model = _load_model(args.model)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    ranking = rank_features(model)
    write_ranking_csv(ranking, out)
    return {"ranking": str(out), "features": ranking.total}


def cmd_evaluate(args):
    ds = _load(args)
    if args.ranking:
        ranking = read_ranking_csv(args.ranking, ds.dims)
        ds = select_subset(ds, ranking, args.fraction, args.per_view_quota)
    train, test = split_subjects(ds, args.train_fraction, args.seed)
    clf = train_mlknn(train.instance_matrix(), train.labels, args.mlknn_k, args.smoothing)
    pred, conf = predict_mlknn(clf, test.instance_matrix())
    report = evaluate_metrics(pred, conf, test.labels).as_dict()
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(json.dumps(report, indent=2) + "\n")
    return report


CONFIG_FLAGS = {
    # flag -> (config field, parser)
    "manifest": ("manifest", str),
    "missing_ratios": ("missing_ratios", _floats),
    "lam": ("lam", _floats),
    "eta": ("eta", _floats),
    "delta": ("delta", _floats),
    "gamma": ("gamma", _floats),
    "fraction": ("fraction", float),
    "trials": ("trials", int),
    "base_seed": ("base_seed", int),
    "train_fraction": ("train_fraction", float),
    "graph_q": ("graph_q", int),
    "graph_sigma": ("graph_sigma", float),
    "mlknn_k": ("mlknn_k", int),
    "mlknn_smoothing": ("mlknn_smoothing", float),
    "max_iters": ("max_iters", int),
    "rel_tol": ("rel_tol", float),
    "jobs": ("jobs", int),
}
CONFIG_SWITCHES = ("disable_shared_latent", "disable_graph", "disable_adaptive_weights",
                   "ablation_table", "include_baseline", "per_view_quota",
                   "shift_nonneg", "standardize")


def _add_config_flags(p):
    p.add_argument("--config", help="JSON experiment config; flags override its values")
    for name, (_, parse) in CONFIG_FLAGS.items():
        p.add_argument("--" + name.replace("_", "-"), dest=name, type=parse, default=None)
    for name in CONFIG_SWITCHES:
        p.add_argument("--" + name.replace("_", "-"), dest=name, action="store_true",
                       default=None)
    p.add_argument("--synthetic-seed", type=int, default=None)
    p.add_argument("--synthetic-n", type=int, default=None)


def build_config(args) -> ExperimentConfig:
    data = json.loads(Path(args.config).read_text()) if args.config else {}
    for name, (field_name, _) in CONFIG_FLAGS.items():
        val = getattr(args, name)
        if val is not None:
            data[field_name] = val
    for name in CONFIG_SWITCHES:
        if getattr(args, name):
            data[name] = True
    cfg = ExperimentConfig.from_dict(data)
    syn = {}
    if args.synthetic_seed is not None:
        syn["seed"] = args.synthetic_seed
    if args.synthetic_n is not None:
        syn["n"] = args.synthetic_n
    if syn:
        cfg = replace(cfg, synthetic=replace(cfg.synthetic, **syn))
    return cfg


def cmd_run(args):
    cfg = build_config(args)
    report = run_experiment(cfg)
    out = emit_reports(report, args.out)
    return {"out": str(out), "cells": len(report.cells), "failed": len(report.errors)}


def cmd_sweep(args):
    cfg = build_config(args)
    rows, report = sweep_sensitivity(cfg, fixed_value=args.fixed_value,
                                     fixed_gamma=args.fixed_gamma)
    out = Path(args.out)
    emit_reports(report, out)
    write_sweep_csv(rows, out / "sensitivity.csv")
    return {"out": str(out), "rows": len(rows), "failed": len(report.errors)}


def build_parser():
    parser = argparse.ArgumentParser(prog="aslsl", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="verb", required=True)

    p = sub.add_parser("generate", help="write a synthetic dataset")
    p.add_argument("--n", type=int, default=300)
    p.add_argument("--m", type=int, default=3)
    p.add_argument("--d", type=int, default=50, help="features per view")
    p.add_argument("--dims", help="comma-separated per-view dims (overrides --m/--d)")
    p.add_argument("--k", type=int, default=3)
    p.add_argument("--informative", type=int, default=5)
    p.add_argument("--noise", type=float, default=0.1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", type=Path, default=None)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("inject", help="remove a fraction of instances from every view")
    _add_load_flags(p)
    p.add_argument("--ratio", type=float, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", type=Path, default=None)
    p.set_defaults(func=cmd_inject)

    p = sub.add_parser("fit", help="fit the model, write model, trace and ranking")
    _add_load_flags(p)
    _add_hyper_flags(p)
    p.add_argument("--fixed-alpha", action="store_true", help="keep view weights uniform")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", type=Path, default=None)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("rank", help="rank features of a fitted model")
    p.add_argument("--model", required=True)
    p.add_argument("--out", type=Path, default=None)
    p.set_defaults(func=cmd_rank)

    p = sub.add_parser("evaluate", help="ML-KNN metrics on (optionally selected) features")
    _add_load_flags(p)
    p.add_argument("--ranking", help="ranking CSV; omit to use all features")
    p.add_argument("--fraction", type=float, default=0.1)
    p.add_argument("--per-view-quota", action="store_true")
    p.add_argument("--train-fraction", type=float, default=0.7)
    p.add_argument("--mlknn-k", type=int, default=10)
    p.add_argument("--smoothing", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", type=Path, default=None)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("run", help="full pipeline over ratios, grids and trials")
    _add_config_flags(p)
    p.add_argument("--out", type=Path, default=None)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", help="parameter sensitivity tables")
    _add_config_flags(p)
    p.add_argument("--fixed-value", type=float, default=0.1)
    p.add_argument("--fixed-gamma", type=float, default=2.0)
    p.add_argument("--out", type=Path, default=None)
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if getattr(args, "out", "unset") is None:
        defaults = {"rank": default_out() / "ranking.csv",
                    "evaluate": default_out() / "evaluation.json"}
        args.out = defaults.get(args.verb, default_out())
    try:
        result = args.func(args)
    except Exception as exc:
        err = {"error": type(exc).__name__, "message": str(exc)}
        for attr in ("source", "row", "col"):
            if getattr(exc, attr, None) is not None:
                err[attr] = getattr(exc, attr)
        print(json.dumps(err), file=sys.stderr)
        return 1
    print(json.dumps(result, default=str))
    return 0


if __name__ == "__main__":
    sys.exit(main())
