"""Synthetic incomplete multi-view data, missingness injection and splits."""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .dataset import MultiViewDataset, ViewBlock, make_view


class SimulationError(ValueError):
    pass


@dataclass(frozen=True)
class SyntheticSpec:
    n: int = 300
    m: int = 3
    k: int = 3
    dims: tuple = (50, 50, 50)
    informative_per_view: int = 5
    noise_level: float = 0.1
    seed: int = 0

    def __post_init__(self):
        if len(self.dims) != self.m:
            raise SimulationError(f"dims has {len(self.dims)} entries for m={self.m} views")
        if self.n < 2 or self.k < 1 or self.m < 1:
            raise SimulationError("need n >= 2, k >= 1 and m >= 1")
        if not 0 <= self.informative_per_view <= min(self.dims):
            raise SimulationError("informative_per_view must not exceed min(dims)")
        if self.noise_level < 0:
            raise SimulationError("noise_level must be non-negative")


@dataclass(frozen=True)
class MissingnessSpec:
    ratio: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if not 0 <= self.ratio < 1:
            raise SimulationError("missing ratio must lie in [0, 1)")


def _labels_from_latent(rng, U, k, retries=10):
    for _ in range(retries + 1):
        M = np.eye(k) + 0.3 * rng.random((k, k))
        scores = M @ U.T
        Y = (scores > np.median(scores, axis=1, keepdims=True)).astype(float)
        if not np.any(np.all(Y == Y[:, :1], axis=1)):
            return Y
    raise SimulationError("could not draw non-constant label rows")


def generate_synthetic(spec: SyntheticSpec):
    """Planted multi-view data driven by one non-negative latent factor.

    Labels threshold a mixing of the latent factor ``U*`` at each row's median.
    In every view, ``informative_per_view`` rows at random positions are
    ``W U*^T`` plus ``noise_level``-scaled exponential noise.  The remaining
    rows are exponential noise whose spread matches the informative rows, so
    variance alone cannot tell them apart.  Returns ``(dataset, informative)`` where ``informative``
    lists the planted row indices per view.
    """
    rng = np.random.default_rng(spec.seed)
    n, k, r = spec.n, spec.k, spec.informative_per_view
    U = rng.random((n, k))
    Y = _labels_from_latent(rng, U, k)
    views, informative = [], []
    for v, d in enumerate(spec.dims):
        W = rng.random((r, k))
        signal = W @ U.T + spec.noise_level * rng.exponential(size=(r, n))
        spread = float(np.mean(np.std(W @ U.T, axis=1))) if r else 1.0
        noise = spread * rng.exponential(size=(d - r, n))
        rows = np.vstack([signal, noise])
        perm = rng.permutation(d)
        x = np.empty_like(rows)
        x[perm] = rows
        informative.append(np.sort(perm[:r]))
        views.append(ViewBlock(v, x, np.ones(n, dtype=bool)))
    ds = MultiViewDataset(views, Y, name=f"synthetic-{spec.seed}")
    return ds, informative


def inject_missingness(dataset, spec: MissingnessSpec, retries=100):
    """Mark ``floor(ratio * n)`` uniformly chosen instances absent in each view.

    Views are drawn independently except the last, which is drawn uniformly
    among instances still present elsewhere so that every instance keeps at
    least one view; the whole draw is repeated if that pool is too small.
    Absent columns are zeroed.  Instances already absent stay absent.
    """
    n, m = dataset.n, dataset.m
    count = int(np.floor(spec.ratio * n + 1e-9))
    if count == 0:
        return dataset
    rng = np.random.default_rng(spec.seed)
    base = dataset.masks
    for _ in range(retries):
        absent = np.zeros((m, n), dtype=bool)
        for v in range(m - 1):
            absent[v, rng.choice(n, count, replace=False)] = True
        present = base & ~absent
        pool = np.flatnonzero(present[: m - 1].any(axis=0)) if m > 1 else np.empty(0, int)
        if pool.size < count:
            continue
        absent[m - 1, rng.choice(pool, count, replace=False)] = True
        present = base & ~absent
        if present.any(axis=0).all():
            break
    else:
        raise SimulationError(
            f"ratio {spec.ratio} leaves some instance without any view after {retries} draws"
        )
    views = [make_view(v.view_id, v.features, present[i]) for i, v in enumerate(dataset.views)]
    return replace(dataset, views=views)


def split_indices(n, train_fraction=0.7, seed=0, groups=None):
    """Train/test instance indices; whole groups stay together when given."""
    if not 0 < train_fraction < 1:
        raise SimulationError("train_fraction must lie in (0, 1)")
    rng = np.random.default_rng(seed)
    if groups is None:
        n_train = int(round(train_fraction * n))
        if not 0 < n_train < n:
            raise SimulationError("split leaves an empty partition")
        perm = rng.permutation(n)
        return np.sort(perm[:n_train]), np.sort(perm[n_train:])
    groups = np.asarray(groups)
    uniq = np.unique(groups)
    g_train = int(round(train_fraction * uniq.size))
    if not 0 < g_train < uniq.size:
        raise SimulationError("group split leaves an empty partition")
    in_train = np.isin(groups, rng.permutation(uniq)[:g_train])
    return np.flatnonzero(in_train), np.flatnonzero(~in_train)


def split_subjects(dataset, train_fraction=0.7, seed=0, group_mode=True):
    """Random train/test split of ``dataset``.

    Instances are split individually unless the dataset carries subject
    groups (and ``group_mode`` is on), in which case whole subjects move.
    """
    groups = dataset.groups if group_mode else None
    tr, te = split_indices(dataset.n, train_fraction, seed, groups)
    return dataset.take(tr), dataset.take(te)
