"""Adaptive shared latent structure learning (ASLSL) for feature selection on
incomplete multi-view, multi-label data, with the ML-KNN evaluation pipeline."""

__version__ = "0.1.0"

from .dataset import (DatasetError, MultiViewDataset, ViewBlock, load_dataset,
                      make_dataset, make_view, mask_matrix, save_dataset)
from .graph import LabelGraph, build_label_graph, laplacian_quadratic
from .metrics import MetricReport, evaluate
from .mlknn import MlknnModel, predict_mlknn, train_mlknn
from .optimizer import (AslslModel, ConvergenceTrace, Hyperparams, fit, init_model,
                        objective)
from .ranking import FeatureRanking, rank_features, select_subset
from .simulation import (MissingnessSpec, SyntheticSpec, generate_synthetic,
                         inject_missingness, split_subjects)

__all__ = [
    "AslslModel", "ConvergenceTrace", "DatasetError", "FeatureRanking", "Hyperparams",
    "LabelGraph", "MetricReport", "MissingnessSpec", "MlknnModel", "MultiViewDataset",
    "SyntheticSpec", "ViewBlock", "build_label_graph", "evaluate", "fit",
    "generate_synthetic", "init_model", "inject_missingness", "laplacian_quadratic",
    "load_dataset", "make_dataset", "make_view", "mask_matrix", "objective",
    "predict_mlknn", "rank_features", "save_dataset", "select_subset", "split_subjects",
    "train_mlknn",
]
