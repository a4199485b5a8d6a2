"""Feature scoring by projection row norms and subset selection."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .dataset import ViewBlock


@dataclass(frozen=True)
class FeatureRanking:
    view_ids: np.ndarray  # per scored feature
    feature_index: np.ndarray  # row index inside its view
    scores: np.ndarray
    order: np.ndarray  # positions into the arrays above, best first
    dims: tuple  # d_v per view, needed for quota selection

    @property
    def total(self) -> int:
        return int(self.scores.size)


def rank_features(Q) -> FeatureRanking:
    """Score every feature by ``||q_i^(v)||_2`` and sort descending.

    ``Q`` is a fitted model or its list of projection matrices.  Equal scores
    are ordered by (view, feature index).
    """
    Q = getattr(Q, "Q", Q)
    view_ids = np.concatenate([np.full(q.shape[0], v, dtype=int) for v, q in enumerate(Q)])
    index = np.concatenate([np.arange(q.shape[0]) for q in Q])
    scores = np.concatenate([np.sqrt(np.sum(q * q, axis=1)) for q in Q])
    order = np.lexsort((index, view_ids, -scores))
    return FeatureRanking(view_ids, index, scores, order, tuple(q.shape[0] for q in Q))


def n_selected(fraction, total) -> int:
    """``ceil(fraction * total)``, immune to float noise such as 0.1*150."""
    return min(total, math.ceil(round(fraction * total, 9)))


def selected_features(ranking: FeatureRanking, fraction, per_view_quota=False):
    """Selected feature indices per view (sorted ascending within each view)."""
    if not 0 < fraction <= 1:
        raise ValueError("fraction must lie in (0, 1]")
    picked = [[] for _ in ranking.dims]
    if per_view_quota:
        for pos in ranking.order:
            v = ranking.view_ids[pos]
            if len(picked[v]) < n_selected(fraction, ranking.dims[v]):
                picked[v].append(ranking.feature_index[pos])
    else:
        for pos in ranking.order[: n_selected(fraction, ranking.total)]:
            picked[ranking.view_ids[pos]].append(ranking.feature_index[pos])
    return [np.sort(np.asarray(p, dtype=int)) for p in picked]


def select_subset(dataset, ranking: FeatureRanking, fraction, per_view_quota=False):
    """Restrict ``dataset`` to the selected feature rows; masks are kept."""
    if tuple(dataset.dims) != tuple(ranking.dims):
        raise ValueError("ranking was computed for different view dimensions")
    keep = selected_features(ranking, fraction, per_view_quota)
    views = [ViewBlock(v.view_id, v.features[idx], v.presence.copy())
             for v, idx in zip(dataset.views, keep)]
    return replace(dataset, views=views)


def write_ranking_csv(ranking: FeatureRanking, path):
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["rank", "view", "feature_index", "score"])
        for r, pos in enumerate(ranking.order, 1):
            w.writerow([r, int(ranking.view_ids[pos]), int(ranking.feature_index[pos]),
                        repr(float(ranking.scores[pos]))])


def read_ranking_csv(path, dims) -> FeatureRanking:
    rows = list(csv.DictReader(Path(path).open()))
    rows.sort(key=lambda r: int(r["rank"]))
    view_ids = np.array([int(r["view"]) for r in rows], dtype=int)
    index = np.array([int(r["feature_index"]) for r in rows], dtype=int)
    scores = np.array([float(r["score"]) for r in rows])
    return FeatureRanking(view_ids, index, scores, np.arange(len(rows)), tuple(dims))
