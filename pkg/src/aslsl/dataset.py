"""Incomplete multi-view, multi-label data: containers, validation and file I/O.

Feature matrices are stored feature-by-instance (``d_v x n``), labels are
``k x n`` and every view carries a boolean presence vector of length ``n``.
Columns of absent instances are stored as zeros.
"""
from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

ORIENTATIONS = ("feature_major", "instance_major")


class DatasetError(ValueError):
    """Raised when input data violates a dataset invariant.

    ``source``, ``row`` and ``col`` locate the offending entry when known.
    """

    def __init__(self, message, source=None, row=None, col=None):
        self.message = message
        self.source = None if source is None else str(source)
        self.row = row
        self.col = col
        where = []
        if self.source is not None:
            where.append(f"file {self.source}")
        if row is not None:
            where.append(f"row {row}")
        if col is not None:
            where.append(f"column {col}")
        super().__init__(message + (f" ({', '.join(where)})" if where else ""))


@dataclass(frozen=True)
class ViewBlock:
    view_id: int
    features: np.ndarray  # d_v x n
    presence: np.ndarray  # bool, length n

    @property
    def dim(self) -> int:
        return self.features.shape[0]


@dataclass(frozen=True)
class MultiViewDataset:
    views: list
    labels: np.ndarray  # k x n, values in {0, 1}
    name: str = "dataset"
    groups: np.ndarray | None = None  # optional subject id per instance

    @property
    def n(self) -> int:
        return self.labels.shape[1]

    @property
    def m(self) -> int:
        return len(self.views)

    @property
    def k(self) -> int:
        return self.labels.shape[0]

    @property
    def dims(self) -> list:
        return [v.dim for v in self.views]

    @property
    def masks(self) -> np.ndarray:
        """Presence indicators stacked as an ``m x n`` boolean array."""
        return np.vstack([v.presence for v in self.views])

    def take(self, index) -> "MultiViewDataset":
        """Restrict the dataset to the instances in ``index`` (in that order)."""
        index = np.asarray(index, dtype=np.intp)
        views = [
            ViewBlock(v.view_id, v.features[:, index].copy(), v.presence[index].copy())
            for v in self.views
        ]
        groups = None if self.groups is None else self.groups[index].copy()
        return replace(self, views=views, labels=self.labels[:, index].copy(), groups=groups)

    def instance_matrix(self) -> np.ndarray:
        """All views concatenated feature-wise, shape ``(sum d_v) x n``."""
        if not self.views:
            return np.zeros((0, self.n))
        return np.vstack([v.features for v in self.views])


def mask_matrix(view: ViewBlock) -> np.ndarray:
    """Diagonal ``n x n`` indicator with ones at the instances present in ``view``."""
    return np.diag(np.asarray(view.presence, dtype=float))


def make_view(view_id, features, presence=None, *, source=None) -> ViewBlock:
    """Validate one view and zero the columns of absent instances."""
    features = np.array(features, dtype=float, ndmin=2)
    if features.ndim != 2:
        raise DatasetError("feature matrix must be two-dimensional", source)
    n = features.shape[1]
    if presence is None:
        presence = np.ones(n, dtype=bool)
    presence = np.asarray(presence)
    if presence.shape != (n,):
        raise DatasetError(
            f"presence vector has length {presence.size}, expected {n}", source
        )
    if not np.isin(presence, (0, 1)).all():
        bad = int(np.flatnonzero(~np.isin(presence, (0, 1)))[0])
        raise DatasetError("mask entries must be 0 or 1", source, col=bad)
    presence = presence.astype(bool)
    _check_finite(features, source)
    neg = np.argwhere(features < 0)
    if neg.size:
        r, c = (int(x) for x in neg[0])
        raise DatasetError(
            "negative feature value (use shift_nonneg to shift rows)", source, r, c
        )
    features = np.where(presence[None, :], features, 0.0)
    return ViewBlock(int(view_id), features, presence)


def make_dataset(views, labels, name="dataset", groups=None, *, label_source=None):
    """Assemble and validate a :class:`MultiViewDataset`.

    ``views`` is a list of :class:`ViewBlock` (see :func:`make_view`).
    """
    labels = np.array(labels, dtype=float, ndmin=2)
    _check_finite(labels, label_source)
    off = np.argwhere((labels != 0) & (labels != 1))
    if off.size:
        r, c = (int(x) for x in off[0])
        raise DatasetError("non-binary label", label_source, r, c)
    if labels.shape[0] < 1:
        raise DatasetError("label matrix needs at least one row", label_source)
    n = labels.shape[1]
    for v in views:
        if v.features.shape[1] != n:
            raise DatasetError(
                f"view {v.view_id} has {v.features.shape[1]} instances, labels have {n}"
            )
    if views:
        covered = np.any(np.vstack([v.presence for v in views]), axis=0)
        if not covered.all():
            j = int(np.flatnonzero(~covered)[0])
            raise DatasetError("instance absent from all views", col=j)
    for r in range(labels.shape[0]):
        if n and np.all(labels[r] == labels[r, 0]):
            warnings.warn(f"label row {r} is constant", RuntimeWarning, stacklevel=2)
    if groups is not None:
        groups = np.asarray(groups)
        if groups.shape != (n,):
            raise DatasetError(f"groups must have length {n}")
    return MultiViewDataset(list(views), labels, name, groups)


def _check_finite(a, source):
    bad = np.argwhere(~np.isfinite(a))
    if bad.size:
        r, c = (int(x) for x in bad[0])
        raise DatasetError("non-finite value", source, r, c)


def shift_nonneg(features, presence=None):
    """Shift every feature row by its minimum over present instances."""
    features = np.array(features, dtype=float)
    cols = slice(None) if presence is None else np.asarray(presence, dtype=bool)
    sub = features[:, cols]
    if sub.size == 0:
        return features
    mins = np.min(sub, axis=1, keepdims=True)
    return features - np.minimum(mins, 0.0)


def standardize(dataset: MultiViewDataset) -> MultiViewDataset:
    """Min-max scale each feature row to [0, 1] over the present instances.

    Keeps the data non-negative; constant rows become zero.
    """
    views = []
    for v in dataset.views:
        x = v.features.copy()
        p = v.presence
        if p.any() and x.size:
            lo = x[:, p].min(axis=1, keepdims=True)
            hi = x[:, p].max(axis=1, keepdims=True)
            span = np.where(hi > lo, hi - lo, 1.0)
            x = (x - lo) / span
            x[:, ~p] = 0.0
        views.append(ViewBlock(v.view_id, x, p.copy()))
    return replace(dataset, views=views)


def _read_csv(path):
    path = Path(path)
    if not path.exists():
        raise DatasetError("file not found", path)
    try:
        a = np.loadtxt(path, delimiter=",", dtype=float, ndmin=2)
    except ValueError as exc:
        raise DatasetError(f"unparseable CSV: {exc}", path) from None
    _check_finite(a, path)
    return a


def load_dataset(manifest_path, *, shift_nonneg_rows=False, standardize_rows=False):
    """Load a dataset described by a JSON manifest.

    Manifest fields: ``name``, ``views`` (list of ``{id, path, orientation}``),
    ``labels``, ``masks`` and optionally ``groups``.  Paths are relative to the
    manifest.  ``orientation`` is ``feature_major`` (default, ``d_v x n``) or
    ``instance_major`` (``n x d_v``, transposed on load).
    """
    manifest_path = Path(manifest_path)
    if not manifest_path.exists():
        raise DatasetError("manifest not found", manifest_path)
    try:
        spec = json.loads(manifest_path.read_text())
    except json.JSONDecodeError as exc:
        raise DatasetError(f"invalid JSON: {exc}", manifest_path) from None
    for key in ("views", "labels", "masks"):
        if key not in spec:
            raise DatasetError(f"manifest lacks field '{key}'", manifest_path)
    base = manifest_path.parent

    label_path = base / spec["labels"]
    labels = _read_csv(label_path)
    if spec.get("labels_orientation", "feature_major") == "instance_major":
        labels = labels.T
    n = labels.shape[1]

    mask_path = base / spec["masks"]
    masks = _read_csv(mask_path)
    if masks.shape != (len(spec["views"]), n):
        raise DatasetError(
            f"mask matrix is {masks.shape[0]}x{masks.shape[1]}, "
            f"expected {len(spec['views'])}x{n}",
            mask_path,
        )

    views = []
    for i, entry in enumerate(spec["views"]):
        path = base / entry["path"]
        x = _read_csv(path)
        orientation = entry.get("orientation", "feature_major")
        if orientation not in ORIENTATIONS:
            raise DatasetError(f"unknown orientation '{orientation}'", manifest_path)
        if orientation == "instance_major":
            x = x.T
        if x.shape[1] != n:
            raise DatasetError(
                f"dimension mismatch: {x.shape[1]} instances, labels have {n}", path
            )
        presence = masks[i]
        if shift_nonneg_rows:
            x = shift_nonneg(x, presence.astype(bool))
        views.append(make_view(entry.get("id", i), x, presence, source=path))

    groups = None
    if spec.get("groups"):
        groups = np.loadtxt(base / spec["groups"], delimiter=",", dtype=str, ndmin=1)
    try:
        ds = make_dataset(views, labels, spec.get("name", manifest_path.stem), groups,
                          label_source=label_path)
    except DatasetError as exc:
        if exc.source is None and exc.message == "instance absent from all views":
            raise DatasetError(exc.message, mask_path, col=exc.col) from None
        raise
    return standardize(ds) if standardize_rows else ds


def save_dataset(dataset: MultiViewDataset, out_dir, name=None) -> Path:
    """Write ``dataset`` as CSV files plus a manifest; returns the manifest path."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    name = name or dataset.name
    entries = []
    for v in dataset.views:
        fname = f"view{v.view_id}.csv"
        _write_csv(out_dir / fname, v.features)
        entries.append({"id": v.view_id, "path": fname, "orientation": "feature_major"})
    _write_csv(out_dir / "labels.csv", dataset.labels, fmt="%d")
    _write_csv(out_dir / "masks.csv", dataset.masks.astype(int), fmt="%d")
    manifest = {"name": name, "views": entries, "labels": "labels.csv", "masks": "masks.csv"}
    if dataset.groups is not None:
        np.savetxt(out_dir / "groups.csv", dataset.groups.astype(str), fmt="%s")
        manifest["groups"] = "groups.csv"
    path = out_dir / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2) + "\n")
    return path


def _write_csv(path, a, fmt="%.17g"):
    a = np.asarray(a)
    if a.shape[0] == 0:
        Path(path).write_text("")
        return
    np.savetxt(path, a, delimiter=",", fmt=fmt)
