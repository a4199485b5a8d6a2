"""Alternating multiplicative-update solver for adaptive shared latent structure learning.

The objective over non-negative ``Q^(v)`` (``d_v x k``), ``U`` (``n x k``),
``M`` (``k x k``) and simplex weights ``alpha`` is::

    sum_v alpha_v^gamma * [ ||(X_v - Q_v U^T) S_v||_F^2 + lam ||Y - M U^T||_F^2
                            + eta Tr(U^T L_Y U) + delta ||Q_v||_{2,1} ]

Each sweep updates Q, U, M and alpha in that order.  The masks ``S_v`` are
kept as 0/1 vectors; ``S_v S_v^T = S_v`` because they are diagonal 0/1.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .graph import LabelGraph


class NonFiniteObjectiveError(FloatingPointError):
    """The objective became NaN/inf, usually a data-scale problem."""


@dataclass(frozen=True)
class Hyperparams:
    lam: float = 1.0
    eta: float = 1.0
    delta: float = 1.0
    gamma: float = 2.0
    max_iters: int = 500
    rel_tol: float = 1e-6
    eps_div: float = 1e-12
    eps_norm: float = 1e-12

    def __post_init__(self):
        for name in ("lam", "eta", "delta"):
            if not getattr(self, name) >= 0:
                raise ValueError(f"{name} must be non-negative")
        if not self.gamma > 1:
            raise ValueError("gamma must be strictly greater than 1")
        if not (self.rel_tol > 0 and self.eps_div > 0 and self.eps_norm > 0):
            raise ValueError("rel_tol and epsilon guards must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be at least 1")


@dataclass
class AslslModel:
    Q: list
    U: np.ndarray
    M: np.ndarray
    alpha: np.ndarray
    hyper: Hyperparams

    def copy(self) -> "AslslModel":
        return AslslModel([q.copy() for q in self.Q], self.U.copy(), self.M.copy(),
                          self.alpha.copy(), self.hyper)


@dataclass
class ConvergenceTrace:
    initial_objective: float = float("nan")
    objective_values: list = field(default_factory=list)
    per_view_residuals: list = field(default_factory=list)
    alphas: list = field(default_factory=list)
    iterations_run: int = 0
    converged: bool = False
    zero_cost_iterations: list = field(default_factory=list)

    def is_monotone(self, slack=1e-9) -> bool:
        vals = [self.initial_objective, *self.objective_values]
        return all(b <= a + slack * abs(a) for a, b in zip(vals, vals[1:]))


class _Problem:
    """Masked data and graph pieces reused across sweeps."""

    def __init__(self, dataset, graph: LabelGraph | None):
        self.s = [v.presence.astype(float) for v in dataset.views]
        # np.where (not a product) so masked entries are exactly 0 whatever they held
        self.X = [np.where(v.presence[None, :], v.features, 0.0) for v in dataset.views]
        self.Y = np.asarray(dataset.labels, dtype=float)
        self.n = self.Y.shape[1]
        if graph is None:
            self.A = np.zeros((self.n, self.n))
            self.deg = np.zeros(self.n)
        else:
            if graph.n != self.n:
                raise ValueError("graph and dataset disagree on the instance count")
            self.A = graph.affinity
            self.deg = graph.degree


def init_model(dataset, k_latent, hyper: Hyperparams, seed=0) -> AslslModel:
    """Random positive start: Q, U, M i.i.d. uniform on (0, 1], alpha uniform."""
    if k_latent < 1:
        raise ValueError("k_latent must be at least 1")
    if k_latent != dataset.k:
        raise ValueError(f"k_latent must equal the label count k={dataset.k}")
    rng = np.random.default_rng(seed)
    Q = [1.0 - rng.random((d, k_latent)) for d in dataset.dims]
    U = 1.0 - rng.random((dataset.n, k_latent))
    M = 1.0 - rng.random((dataset.k, k_latent))
    alpha = np.full(dataset.m, 1.0 / dataset.m)
    return AslslModel(Q, U, M, alpha, hyper)


def l21_norm(A) -> float:
    return float(np.sum(np.sqrt(np.sum(A * A, axis=1))))


def _costs(model, prob):
    """Per-view costs d_v and the masked reconstruction residuals."""
    h = model.hyper
    label_fit = float(np.sum((prob.Y - model.M @ model.U.T) ** 2))
    U = model.U
    manifold = float(np.sum(prob.deg[:, None] * U * U) - np.sum(U * (prob.A @ U)))
    shared = h.lam * label_fit + h.eta * manifold
    res, d = [], []
    for X, s, Q in zip(prob.X, prob.s, model.Q):
        r = float(np.sum(((X - Q @ U.T) * s) ** 2))
        res.append(r)
        d.append(r + shared + h.delta * l21_norm(Q))
    return np.array(d), res


def _objective(model, prob):
    d, res = _costs(model, prob)
    return float(np.sum(model.alpha ** model.hyper.gamma * d)), res


def view_costs(model, dataset, graph) -> np.ndarray:
    """The bracketed per-view cost d_v that alpha is fitted against."""
    return _costs(model, _Problem(dataset, graph))[0]


def objective(model, dataset, graph) -> float:
    prob = _Problem(dataset, graph)
    if len(model.Q) != len(prob.X):
        raise ValueError("model and dataset disagree on the view count")
    for Q, X in zip(model.Q, prob.X):
        if Q.shape[0] != X.shape[0]:
            raise ValueError("projection rows do not match view dimension")
    if model.U.shape[0] != prob.n or model.M.shape[0] != prob.Y.shape[0]:
        raise ValueError("U or M shape does not match the dataset")
    return _objective(model, prob)[0]


def _update_Q(model, prob):
    h = model.hyper
    U = model.U
    out = []
    for X, s, Q in zip(prob.X, prob.s, model.Q):
        SU = s[:, None] * U
        num = X @ SU
        D = 1.0 / (2.0 * np.sqrt(np.sum(Q * Q, axis=1) + h.eps_norm))
        den = Q @ (U.T @ SU) + h.delta * D[:, None] * Q + h.eps_div
        out.append(Q * num / den)
    return out


def _update_U(model, prob):
    h = model.hyper
    U, M = model.U, model.M
    w = model.alpha ** h.gamma
    wsum = float(np.sum(w))
    num = np.zeros_like(U)
    den = np.zeros_like(U)
    for wv, X, s, Q in zip(w, prob.X, prob.s, model.Q):
        num += (wv * s)[:, None] * (X.T @ Q)
        den += (wv * s)[:, None] * (U @ (Q.T @ Q))
    # L_Y = G_Y - S_Y split across numerator/denominator keeps both non-negative
    num += wsum * h.lam * (prob.Y.T @ M) + wsum * h.eta * (prob.A @ U)
    den += wsum * h.eta * prob.deg[:, None] * U + wsum * h.lam * (U @ (M.T @ M)) + h.eps_div
    return U * num / den


def _update_M(model, prob):
    U, M = model.U, model.M
    return M * (prob.Y @ U) / (M @ (U.T @ U) + model.hyper.eps_div)


def alpha_from_costs(d, gamma):
    """Closed-form simplex weights minimising ``sum_v alpha_v^gamma d_v``.

    Returns ``(alpha, zero_cost)``; views with zero cost share the full weight
    equally (the limit of the closed form as their cost goes to zero).
    """
    d = np.asarray(d, dtype=float)
    if not gamma > 1:
        raise ValueError("gamma must be strictly greater than 1")
    zero = d <= 0
    if zero.any():
        return zero / zero.sum(), True
    # alpha_v ~ d_v^(1/(1-gamma)); work in logs so large costs do not underflow
    logw = -np.log(d) / (gamma - 1.0)
    w = np.exp(logw - logw.max())
    return w / w.sum(), False


def update_Q(model, dataset):
    return _update_Q(model, _Problem(dataset, None))


def update_U(model, dataset, graph):
    return _update_U(model, _Problem(dataset, graph))


def update_M(model, dataset):
    return _update_M(model, _Problem(dataset, None))


def update_alpha(model, dataset, graph):
    return alpha_from_costs(view_costs(model, dataset, graph), model.hyper.gamma)[0]


def fit(dataset, graph, hyper: Hyperparams, seed=0, *, model=None,
        adaptive_weights=True, debug=False):
    """Run the alternating updates until the relative objective change drops
    below ``hyper.rel_tol`` or ``hyper.max_iters`` sweeps have run.

    ``adaptive_weights=False`` keeps alpha at its starting (uniform) value.
    Returns ``(model, trace)``.
    """
    prob = _Problem(dataset, graph)
    model = init_model(dataset, dataset.k, hyper, seed) if model is None else model.copy()
    model.hyper = hyper
    trace = ConvergenceTrace()
    prev, _ = _objective(model, prob)
    if not np.isfinite(prev):
        raise NonFiniteObjectiveError("initial objective is not finite; check data scale")
    trace.initial_objective = prev

    for it in range(1, hyper.max_iters + 1):
        model.Q = _update_Q(model, prob)
        model.U = _update_U(model, prob)
        model.M = _update_M(model, prob)
        d, res = _costs(model, prob)
        if adaptive_weights:
            model.alpha, flagged = alpha_from_costs(d, hyper.gamma)
            if flagged:
                trace.zero_cost_iterations.append(it)
        if debug:
            for name, a in (("U", model.U), ("M", model.M), *(("Q", q) for q in model.Q)):
                assert np.all(a >= 0), f"negative entry in {name} at sweep {it}"
            assert abs(model.alpha.sum() - 1.0) < 1e-10
        cur = float(np.sum(model.alpha ** hyper.gamma * d))
        if not np.isfinite(cur):
            raise NonFiniteObjectiveError(
                f"objective became {cur} at sweep {it}; rescale the features"
            )
        trace.objective_values.append(cur)
        trace.per_view_residuals.append(res)
        trace.alphas.append(model.alpha.copy())
        trace.iterations_run = it
        if abs(prev - cur) <= hyper.rel_tol * max(abs(prev), np.finfo(float).tiny):
            trace.converged = True
            break
        prev = cur
    return model, trace


def write_trace_csv(trace: ConvergenceTrace, path):
    """One row per sweep: iteration, objective, per-view residuals, alpha."""
    path = Path(path)
    m = len(trace.alphas[0]) if trace.alphas else 0
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["iteration", "objective"]
                   + [f"residual_{v}" for v in range(m)] + [f"alpha_{v}" for v in range(m)])
        for i, (obj, res, a) in enumerate(
                zip(trace.objective_values, trace.per_view_residuals, trace.alphas), 1):
            w.writerow([i, repr(obj), *map(repr, res), *(repr(float(x)) for x in a)])
