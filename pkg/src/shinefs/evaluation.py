"""Clustering-based evaluation of selected features."""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

from ._backend import kernels
from .model import EvalReport, HyperParams, MultiViewDataset, ValidationError

log = logging.getLogger(__name__)

DEFAULT_RATIOS = (0.1, 0.2, 0.3, 0.4, 0.5)
SEED_STRIDE = 1_000_003


@dataclass(frozen=True, eq=False)
class ClusteringRun:
    labels: np.ndarray
    inertia: float
    iterations: int
    seed: int
    inertia_history: tuple = ()


def restart_seeds(master: int, count: int) -> list:
    """Seeds for ``count`` independent restarts derived from ``master``."""
    return [int(master) * SEED_STRIDE + i for i in range(count)]


def _kmeanspp(X: np.ndarray, c: int, rng: np.random.Generator) -> np.ndarray:
    """Greedy k-means++ seeding: best of several D^2-sampled candidates per center."""
    n = X.shape[0]
    trials = 2 + int(math.log(c))
    first = int(rng.integers(n))
    centers = [X[first]]
    closest = ((X - X[first]) ** 2).sum(axis=1)
    for _ in range(1, c):
        total = closest.sum()
        if total <= 0:
            # all points coincide with a center; fall back to uniform choice
            cand = rng.integers(n, size=trials)
        else:
            cand = np.searchsorted(np.cumsum(closest), rng.uniform(size=trials) * total)
            cand = np.minimum(cand, n - 1)
        best, best_pot, best_d = None, np.inf, None
        for j in cand:
            d = np.minimum(closest, ((X - X[j]) ** 2).sum(axis=1))
            pot = d.sum()
            if pot < best_pot:
                best, best_pot, best_d = j, pot, d
        centers.append(X[best])
        closest = best_d
    return np.array(centers)


def _repair_empty(X, labels, d2, centers):
    """Give each empty cluster the point farthest from its centroid (in place on copies)."""
    c = centers.shape[0]
    counts = np.bincount(labels, minlength=c)
    if counts.min() > 0:
        return labels, centers
    labels, d2, centers = labels.copy(), d2.copy(), centers.copy()
    for q in np.flatnonzero(counts == 0):
        movable = counts[labels] > 1
        i = int(np.argmax(np.where(movable, d2, -1.0)))
        counts[labels[i]] -= 1
        labels[i] = q
        counts[q] = 1
        d2[i] = 0.0
        centers[q] = X[i]
    return labels, centers


def kmeans(M: np.ndarray, c: int, seed: int = 0, max_iters: int = 100) -> ClusteringRun:
    """Lloyd's algorithm on the columns of ``M`` (features x samples)."""
    X = np.ascontiguousarray(np.asarray(M, dtype=np.float64).T)
    n = X.shape[0]
    if c > n:
        raise ValidationError(f"c={c} exceeds the sample count {n}")
    if c < 1:
        raise ValidationError("c must be >= 1")
    rng = np.random.default_rng(seed)
    centers = np.ascontiguousarray(_kmeanspp(X, c, rng))
    labels = None
    history = []
    it = 0
    for it in range(1, max_iters + 1):
        new, d2 = kernels.lloyd_assign(X, centers)
        new, centers = _repair_empty(X, new, d2, centers)
        history.append(float(((X - centers[new]) ** 2).sum()))
        if labels is not None and np.array_equal(new, labels):
            break
        labels = new
        centers = np.ascontiguousarray(
            np.array([X[labels == q].mean(axis=0) for q in range(c)])
        )
        history.append(float(((X - centers[labels]) ** 2).sum()))
    inertia = float(((X - centers[labels]) ** 2).sum())
    return ClusteringRun(labels=labels, inertia=inertia, iterations=it, seed=seed,
                         inertia_history=tuple(history))


def _contingency(truth, pred):
    truth = np.asarray(truth)
    pred = np.asarray(pred)
    if truth.shape != pred.shape or truth.ndim != 1:
        raise ValidationError(f"length mismatch: {truth.shape} vs {pred.shape}")
    if truth.size == 0:
        raise ValidationError("need at least one sample")
    _, t = np.unique(truth, return_inverse=True)
    _, p = np.unique(pred, return_inverse=True)
    table = np.zeros((t.max() + 1, p.max() + 1), dtype=np.int64)
    np.add.at(table, (t, p), 1)
    return table


def accuracy(truth, pred) -> float:
    """Fraction of samples correct under the best one-to-one cluster-to-class map."""
    table = _contingency(truth, pred)
    rows, cols = linear_sum_assignment(table, maximize=True)
    return float(table[rows, cols].sum()) / table.sum()


def nmi(truth, pred) -> float:
    """Mutual information over max(H(truth), H(pred)), natural logs.

    Two single-cluster partitions give 0/0, defined here as 1.0.
    """
    table = _contingency(truth, pred).astype(np.float64)
    n = table.sum()
    pij = table / n
    pi = pij.sum(axis=1)
    pj = pij.sum(axis=0)
    h_t = -float(np.sum(pi * np.log(pi)))
    h_p = -float(np.sum(pj * np.log(pj)))
    denom = max(h_t, h_p)
    if denom <= 0.0:
        log.info("nmi: both partitions have a single cluster; returning 1.0")
        return 1.0
    nz = pij > 0
    mi = float(np.sum(pij[nz] * np.log(pij[nz] / np.outer(pi, pj)[nz])))
    return min(max(mi / denom, 0.0), 1.0)


def _standardize_rows(M: np.ndarray) -> np.ndarray:
    mu = M.mean(axis=1, keepdims=True)
    sd = M.std(axis=1, keepdims=True)
    return np.where(sd < 1e-12, 0.0, (M - mu) / np.where(sd < 1e-12, 1.0, sd))


def cluster_scores(dataset: MultiViewDataset, selected: Sequence, c: int, seeds: Sequence[int]):
    if dataset.labels is None:
        raise ValidationError("dataset has no labels")
    if len(selected) == 0:
        raise ValidationError("empty feature selection")
    if len(set(map(tuple, selected))) != len(selected):
        raise ValidationError("duplicate features in selection")
    M = _standardize_rows(dataset.subset(selected))
    accs, nmis = [], []
    for s in seeds:
        run = kmeans(M, c, seed=s)
        accs.append(accuracy(dataset.labels, run.labels))
        nmis.append(nmi(dataset.labels, run.labels))
    return accs, nmis


def evaluate_selection(
    dataset: MultiViewDataset,
    selected: Sequence,
    c: int,
    restarts: int = 30,
    seed: int = 0,
    ratio: Optional[float] = None,
    method: str = "shinefs",
    objective_trace: Sequence[float] = (),
) -> EvalReport:
    """k-means ``restarts`` times on the z-scored selected features; ACC/NMI mean and std."""
    t0 = time.perf_counter()
    selected = [tuple(map(int, p)) for p in selected]
    accs, nmis = cluster_scores(dataset, selected, c, restart_seeds(seed, restarts))
    if ratio is None:
        ratio = len(selected) / dataset.total_features
    return EvalReport(
        selected=tuple(selected),
        ratio=float(ratio),
        acc_mean=float(np.mean(accs)),
        acc_std=float(np.std(accs)),
        nmi_mean=float(np.mean(nmis)),
        nmi_std=float(np.std(nmis)),
        objective_trace=tuple(objective_trace),
        wallclock=time.perf_counter() - t0,
        method=method,
        accs=tuple(accs),
        nmis=tuple(nmis),
    )


def random_selection(dataset: MultiViewDataset, h: int, seed: int) -> list:
    rng = np.random.default_rng(seed)
    pairs = [(v, j) for v, d in enumerate(dataset.dims) for j in range(d)]
    pick = np.sort(rng.choice(len(pairs), size=h, replace=False))
    return [pairs[i] for i in pick]


def evaluate_random_baseline(
    dataset: MultiViewDataset, ratio: float, c: int, restarts: int = 30, seed: int = 0, draws: int = 10
) -> EvalReport:
    """Random feature subsets of the given ratio; statistics pooled over ``draws`` x ``restarts`` runs."""
    t0 = time.perf_counter()
    h = math.ceil(round(ratio * dataset.total_features, 9))
    accs, nmis, picked = [], [], []
    for d, draw_seed in enumerate(restart_seeds(seed + 1, draws)):
        sel = random_selection(dataset, h, draw_seed)
        a, m = cluster_scores(dataset, sel, c, restart_seeds(seed, restarts))
        accs += a
        nmis += m
        if d == 0:
            picked = sel
    return EvalReport(
        selected=tuple(picked),
        ratio=float(ratio),
        acc_mean=float(np.mean(accs)),
        acc_std=float(np.std(accs)),
        nmi_mean=float(np.mean(nmis)),
        nmi_std=float(np.std(nmis)),
        wallclock=time.perf_counter() - t0,
        method="random",
        accs=tuple(accs),
        nmis=tuple(nmis),
    )


def sweep(
    dataset: MultiViewDataset,
    params: HyperParams,
    ratios: Sequence[float] = DEFAULT_RATIOS,
    restarts: int = 30,
    baseline: Optional[str] = None,
    baseline_draws: int = 10,
    method: str = "shinefs",
    fit_result=None,
):
    """One fit, then evaluation at every ratio. Returns ``(fit_result, reports)``.

    Reports are ordered by method, then ascending ratio.
    """
    from .optimizer import fit, select_features

    ratios = sorted(float(r) for r in ratios)
    if len(set(ratios)) != len(ratios):
        raise ValidationError("duplicate ratios")
    if dataset.labels is None:
        raise ValidationError("dataset has no labels")
    if fit_result is None:
        fit_result = fit(dataset, params)
    reports = []
    for r in ratios:
        sel = select_features(fit_result, ratio=r)
        reports.append(
            evaluate_selection(dataset, sel, params.c, restarts=restarts, seed=params.seed,
                               ratio=r, method=method,
                               objective_trace=fit_result.objective_trace)
        )
    if baseline == "random":
        for r in ratios:
            reports.append(evaluate_random_baseline(dataset, r, params.c, restarts=restarts,
                                                    seed=params.seed, draws=baseline_draws))
    elif baseline not in (None, "none"):
        raise ValidationError(f"unknown baseline {baseline!r}")
    return fit_result, reports
