"""Multi-label evaluation metrics.

All inputs are ``k x n`` (labels by instances).  Rankings sort confidences in
descending order with ties broken by label index; ranking loss counts tied
(relevant, irrelevant) pairs as half a violation.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

METRIC_NAMES = ("hamming_loss", "ranking_loss", "coverage", "average_precision",
                "macro_f1", "micro_f1")


@dataclass(frozen=True)
class MetricReport:
    hamming_loss: float
    ranking_loss: float
    coverage: float
    average_precision: float
    macro_f1: float
    micro_f1: float
    coverage_normalized: float = float("nan")

    def as_dict(self) -> dict:
        return asdict(self)


def _pair(a, b):
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape or a.ndim != 2:
        raise ValueError(f"expected two k x n arrays of equal shape, got {a.shape} and {b.shape}")
    return a, b


def label_ranks(conf) -> np.ndarray:
    """1-based rank of every label per instance (k x n); rank 1 is most confident."""
    conf = np.asarray(conf, dtype=float)
    order = np.argsort(-conf, axis=0, kind="stable")
    ranks = np.empty_like(order)
    np.put_along_axis(ranks, order, np.arange(1, conf.shape[0] + 1)[:, None], axis=0)
    return ranks


def hamming_loss(pred, truth) -> float:
    pred, truth = _pair(pred, truth)
    if pred.size == 0:
        return 0.0
    return float(np.mean(pred != truth))


def _informative(truth):
    n_rel = truth.sum(axis=0)
    return (n_rel > 0) & (n_rel < truth.shape[0])


def ranking_loss(conf, truth) -> float:
    conf, truth = _pair(conf, truth)
    truth = truth.astype(bool)
    keep = _informative(truth)
    if not keep.any():
        return 0.0
    c = conf[:, keep].T.astype(float)  # n' x k
    t = truth[:, keep].T
    # [i, a, b]: label a relevant, label b irrelevant
    pairs = t[:, :, None] & ~t[:, None, :]
    worse = (c[:, :, None] < c[:, None, :]) + 0.5 * (c[:, :, None] == c[:, None, :])
    viol = np.sum(pairs * worse, axis=(1, 2))
    return float(np.mean(viol / pairs.sum(axis=(1, 2))))


def coverage(conf, truth) -> float:
    """Mean over instances of (rank of the lowest-ranked relevant label) - 1.

    Instances without relevant labels contribute 0.
    """
    conf, truth = _pair(conf, truth)
    if truth.shape[1] == 0:
        return 0.0
    ranks = label_ranks(conf)
    worst = np.max(np.where(truth.astype(bool), ranks, 1), axis=0)
    return float(np.mean(worst - 1))


def average_precision(conf, truth) -> float:
    conf, truth = _pair(conf, truth)
    truth = truth.astype(bool)
    keep = _informative(truth)
    if not keep.any():
        return 1.0
    ranks = label_ranks(conf[:, keep]).T  # n' x k
    t = truth[:, keep].T
    # above[i, a, b]: b relevant and ranked at or above a
    above = t[:, None, :] & (ranks[:, None, :] <= ranks[:, :, None])
    prec = above.sum(axis=2) / ranks
    per_instance = np.sum(prec * t, axis=1) / t.sum(axis=1)
    return float(np.mean(per_instance))


def _f1(tp, fp, fn):
    den = 2 * tp + fp + fn
    return np.divide(2 * tp, den, out=np.zeros_like(den, dtype=float), where=den > 0)


def macro_f1(pred, truth) -> float:
    pred, truth = _pair(pred, truth)
    p, t = pred.astype(bool), truth.astype(bool)
    tp = np.sum(p & t, axis=1)
    fp = np.sum(p & ~t, axis=1)
    fn = np.sum(~p & t, axis=1)
    return float(np.mean(_f1(tp, fp, fn))) if tp.size else 0.0


def micro_f1(pred, truth) -> float:
    pred, truth = _pair(pred, truth)
    p, t = pred.astype(bool), truth.astype(bool)
    return float(_f1(np.sum(p & t), np.sum(p & ~t), np.sum(~p & t)))


def evaluate(pred, conf, truth) -> MetricReport:
    k = np.asarray(truth).shape[0]
    cov = coverage(conf, truth)
    return MetricReport(
        hamming_loss=hamming_loss(pred, truth),
        ranking_loss=ranking_loss(conf, truth),
        coverage=cov,
        average_precision=average_precision(conf, truth),
        macro_f1=macro_f1(pred, truth),
        micro_f1=micro_f1(pred, truth),
        coverage_normalized=cov / k if k else 0.0,
    )
