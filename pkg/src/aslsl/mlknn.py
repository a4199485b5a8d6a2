"""ML-KNN multi-label classifier (Zhang & Zhou, 2007).

Inputs follow the package orientation: features ``d x n``, labels ``k x n``.
Neighbours use Euclidean distance with ties broken by training index.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist


@dataclass(frozen=True)
class MlknnModel:
    k_neighbors: int
    smoothing: float
    prior_true: np.ndarray  # P(H_j), length k
    prior_false: np.ndarray  # P(~H_j)
    cond_true: np.ndarray  # P(c | H_j), k x (K+1)
    cond_false: np.ndarray  # P(c | ~H_j)
    train_features: np.ndarray  # n_train x d
    train_labels: np.ndarray  # k x n_train


def _neighbors(dist, K):
    return np.argsort(dist, axis=1, kind="stable")[:, :K]


def _smoothed(counts, s, K):
    # an empty class with s == 0 has no evidence; its likelihood is left at 0
    den = np.broadcast_to(s * (K + 1) + counts.sum(axis=1, keepdims=True), counts.shape)
    return np.divide(s + counts, den, out=np.zeros(counts.shape), where=den > 0)


def train_mlknn(features, labels, k_neighbors=10, smoothing=1.0) -> MlknnModel:
    X = np.asarray(features, dtype=float).T
    Y = np.asarray(labels, dtype=float)
    n = X.shape[0]
    K = int(k_neighbors)
    if Y.shape[1] != n:
        raise ValueError("features and labels disagree on the instance count")
    if not 0 < K < n:
        raise ValueError(f"k_neighbors={K} must be in [1, n_train={n})")
    s = float(smoothing)

    prior_true = (s + Y.sum(axis=1)) / (2 * s + n)
    prior_false = 1.0 - prior_true

    dist = cdist(X, X)
    np.fill_diagonal(dist, np.inf)
    nn = _neighbors(dist, K)
    counts = Y[:, nn].sum(axis=2).astype(int)  # k x n, label-carrying neighbours
    k = Y.shape[0]
    hit = np.zeros((k, K + 1))
    miss = np.zeros((k, K + 1))
    for j in range(k):
        pos = Y[j] == 1
        hit[j] = np.bincount(counts[j, pos], minlength=K + 1)
        miss[j] = np.bincount(counts[j, ~pos], minlength=K + 1)
    cond_true = _smoothed(hit, s, K)
    cond_false = _smoothed(miss, s, K)
    return MlknnModel(K, s, prior_true, prior_false, cond_true, cond_false, X, Y)


def predict_mlknn(model: MlknnModel, query_features):
    """Return ``(predictions, confidences)``, both ``k x n_test``.

    A label is predicted when its posterior is at least that of its absence.
    """
    Xq = np.asarray(query_features, dtype=float).T
    if Xq.shape[1] != model.train_features.shape[1]:
        raise ValueError(
            f"query has {Xq.shape[1]} features, model was trained on "
            f"{model.train_features.shape[1]}"
        )
    nn = _neighbors(cdist(Xq, model.train_features), model.k_neighbors)
    counts = model.train_labels[:, nn].sum(axis=2).astype(int)  # k x n_test
    rows = np.arange(counts.shape[0])[:, None]
    p1 = model.prior_true[:, None] * model.cond_true[rows, counts]
    p0 = model.prior_false[:, None] * model.cond_false[rows, counts]
    pred = (p1 >= p0).astype(int)
    tot = p1 + p0
    prior = np.broadcast_to(model.prior_true[:, None], tot.shape)
    conf = np.divide(p1, tot, out=prior.astype(float), where=tot > 0)
    return pred, conf
