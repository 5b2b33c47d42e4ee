"""Graph primitives: distances, Laplacians, k-sparse simplex rows, simplex projection."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np

from ._backend import kernels
from .model import KSparseRowGraph, MultiViewDataset, ValidationError

DEGENERATE_DENOM = 1e-15


@dataclass(frozen=True, eq=False)
class KSparseRowSolution:
    weights: np.ndarray
    lam: float
    neighbor_ids: np.ndarray


def pairwise_sq_dists(
    M: Union[np.ndarray, Sequence[np.ndarray]],
    weights: Optional[Sequence[float]] = None,
) -> np.ndarray:
    """Squared Euclidean distances between the columns of ``M``.

    ``M`` may also be a sequence of matrices sharing a column count, in which
    case the result is ``sum_v weights[v] * dist(M[v])``.
    """
    if isinstance(M, np.ndarray) and M.ndim == 2:
        mats = [M]
        if weights is not None:
            weights = [float(np.asarray(weights).ravel()[0])]
    else:
        mats = [np.asarray(x, dtype=np.float64) for x in M]
    if weights is None:
        weights = [1.0] * len(mats)
    if len(weights) != len(mats):
        raise ValueError("one weight per matrix is required")
    n = mats[0].shape[1]
    out = np.zeros((n, n))
    for X, wv in zip(mats, weights):
        X = np.asarray(X, dtype=np.float64)
        if not np.all(np.isfinite(X)):
            raise ValidationError("pairwise_sq_dists: non-finite input")
        sq = np.einsum("ij,ij->j", X, X)
        D = sq[:, None] + sq[None, :] - 2.0 * (X.T @ X)
        out += wv * D
    out = 0.5 * (out + out.T)
    np.maximum(out, 0.0, out=out)
    np.fill_diagonal(out, 0.0)
    return out


def symmetric_laplacian(graph: np.ndarray) -> np.ndarray:
    """Laplacian of the symmetrized graph (g + g^T)/2.

    For any V with columns v_i: sum_ij g_ij ||v_i - v_j||^2 = 2 Tr(V L V^T).
    """
    g = np.asarray(graph, dtype=np.float64)
    if np.any(g < 0):
        i, j = np.argwhere(g < 0)[0]
        raise ValidationError(f"negative graph entry at ({i}, {j})")
    sym = 0.5 * (g + g.T)
    L = -sym
    L[np.diag_indices_from(L)] += sym.sum(axis=1)
    return L


def ksparse_simplex_row(costs, k: int, exclude: int = -1) -> KSparseRowSolution:
    """Closed-form k-neighbor row with its adaptive regularizer.

    Over indices other than ``exclude``, with u_(1) <= ... <= u_(k+1) the
    smallest costs (ties by index):

        w_(j)  = (u_(k+1) - u_(j)) / (k u_(k+1) - sum_{p<=k} u_(p))
        lambda = (k u_(k+1) - sum_{p<=k} u_(p)) / 2

    A denominator <= 1e-15 yields uniform weights 1/k and lambda = 0.
    """
    costs = np.ascontiguousarray(costs, dtype=np.float64).reshape(1, -1)
    n = costs.shape[1]
    available = n - (1 if 0 <= exclude < n else 0)
    if k < 1 or k + 1 > available:
        raise ValidationError(f"k={k} out of range for a row of length {n}")
    if not np.all(np.isfinite(costs)):
        raise ValidationError("non-finite cost")
    idx, w, lam = kernels.ksparse_rows(costs, int(k), np.array([exclude], dtype=np.intp))
    weights = np.zeros(n)
    weights[idx[0]] = w[0]
    return KSparseRowSolution(weights=weights, lam=float(lam[0]), neighbor_ids=idx[0].copy())


def ksparse_graph(costs: np.ndarray, k: int):
    """Apply :func:`ksparse_simplex_row` to every row, excluding the diagonal.

    Returns ``(KSparseRowGraph, lambdas)``.
    """
    costs = np.ascontiguousarray(costs, dtype=np.float64)
    n = costs.shape[0]
    if costs.shape != (n, n):
        raise ValidationError("cost matrix must be square")
    if k < 1 or k > n - 2:
        raise ValidationError(f"k={k} out of range for n={n}")
    if not np.all(np.isfinite(costs)):
        raise ValidationError("non-finite cost")
    idx, w, lam = kernels.ksparse_rows(costs, int(k), np.arange(n, dtype=np.intp))
    return KSparseRowGraph.from_neighbors(idx, w), lam


def project_columns_to_simplex(M: np.ndarray) -> np.ndarray:
    """Euclidean projection of every column onto {a >= 0, sum(a) = 1}."""
    M = np.ascontiguousarray(M, dtype=np.float64)
    if not np.all(np.isfinite(M)):
        raise ValidationError("non-finite input to simplex projection")
    return kernels.project_simplex_columns(M)


def init_knn_graph(dataset: MultiViewDataset, k: int):
    """Probabilistic kNN graph on the concatenated views.

    Returns ``(KSparseRowGraph, lambdas)`` where the lambdas are on the scale
    of the plain squared distances.
    """
    D = pairwise_sq_dists(dataset.concatenated())
    return ksparse_graph(D, k)
