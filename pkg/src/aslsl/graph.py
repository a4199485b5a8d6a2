"""Heat-kernel kNN graph over label columns and its Laplacian."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist

DEFAULT_Q = 5
DEFAULT_SIGMA = 1.0


@dataclass(frozen=True)
class LabelGraph:
    affinity: np.ndarray  # n x n, symmetric
    degree: np.ndarray  # length n
    laplacian: np.ndarray  # n x n
    neighbors_q: int
    sigma: float

    @property
    def n(self) -> int:
        return self.affinity.shape[0]


def knn_indices(dist, q):
    """Indices of the ``q`` nearest columns per row, excluding the row itself.

    Ties are broken by ascending index (stable sort).
    """
    d = dist.copy()
    np.fill_diagonal(d, np.inf)
    return np.argsort(d, axis=1, kind="stable")[:, :q]


def build_label_graph(labels, q=DEFAULT_Q, sigma=DEFAULT_SIGMA) -> LabelGraph:
    """Build ``S_Y``, ``G_Y`` and ``L_Y = G_Y - S_Y`` from a ``k x n`` label matrix.

    Two instances are linked when either is among the other's ``q`` nearest
    neighbours in label space; the link weight is ``exp(-||y_i - y_j||^2 / sigma^2)``.
    """
    labels = np.asarray(labels, dtype=float)
    n = labels.shape[1]
    if q >= n:
        raise ValueError(f"q={q} must be smaller than the instance count n={n}")
    if q < 0:
        raise ValueError("q must be non-negative")
    if not sigma > 0:
        raise ValueError("sigma must be positive")

    cols = labels.T
    sq = cdist(cols, cols, "sqeuclidean")
    link = np.zeros((n, n), dtype=bool)
    if q > 0:
        nn = knn_indices(sq, q)
        link[np.repeat(np.arange(n), q), nn.ravel()] = True
    link |= link.T
    affinity = np.where(link, np.exp(-sq / sigma**2), 0.0)
    degree = affinity.sum(axis=1)
    laplacian = np.diag(degree) - affinity
    return LabelGraph(affinity, degree, laplacian, int(q), float(sigma))


def empty_graph(n) -> LabelGraph:
    """Graph without edges; the manifold term vanishes identically."""
    z = np.zeros((n, n))
    return LabelGraph(z, np.zeros(n), z.copy(), 0, DEFAULT_SIGMA)


def laplacian_quadratic(U, graph: LabelGraph) -> float:
    """``Tr(U^T L_Y U)`` for an ``n x r`` matrix ``U``."""
    U = np.asarray(U, dtype=float)
    if U.ndim != 2 or U.shape[0] != graph.n:
        raise ValueError(f"U must have {graph.n} rows, got shape {U.shape}")
    # degree/affinity split avoids forming L U when only the trace is needed
    return float(np.sum(graph.degree[:, None] * U * U) - np.sum(U * (graph.affinity @ U)))
