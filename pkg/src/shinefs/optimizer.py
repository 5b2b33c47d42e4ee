"""Alternating optimizer for hybrid-order similarity feature selection.

Variables (see :class:`~shinefs.model.ModelState`): per-view projections
``W[v]`` (d_v x c), consensus anchors ``C`` (c x m), anchor graph ``A``
(m x n), second-order graph ``S``, first-order graph ``G``, spectral
embedding ``F`` (n x c) and view weights ``alpha``. One outer iteration
updates them in the order W, A, C, S, G, F, alpha.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .data import zscore
from .graph import (
    init_knn_graph,
    ksparse_graph,
    pairwise_sq_dists,
    project_columns_to_simplex,
    symmetric_laplacian,
)
from .model import (
    FitError,
    HyperParams,
    ModelState,
    MultiViewDataset,
    NumericalError,
    ValidationError,
    validate,
)
from .subsolvers import GpiProblem, gpi_orthogonal, procrustes_max_trace, smallest_eigvecs, spd_solve

STEPS = ("W", "A", "C", "S", "G", "F", "alpha")


@dataclass(frozen=True)
class StepRecord:
    iteration: int
    step: str
    value: float
    # objective with the previous graph but the freshly chosen per-row
    # regularizers (S and G steps only)
    retuned_before: Optional[float] = None


@dataclass(frozen=True, eq=False)
class FitResult:
    state: ModelState
    ranking: tuple
    converged: bool
    iterations: int
    objective_trace: tuple
    step_log: tuple = ()
    params: Optional[HyperParams] = None
    zero_variance_features: tuple = ()
    wallclock: float = 0.0

    def to_dict(self) -> dict:
        return {
            "ranking": [list(p) for p in self.ranking],
            "converged": self.converged,
            "iterations": self.iterations,
            "objective_trace": list(self.objective_trace),
            "params": self.params.to_dict() if self.params else None,
            "zero_variance_features": [list(p) for p in self.zero_variance_features],
        }


# ---------------------------------------------------------------------------
# objective


def l21_norm(W: np.ndarray) -> float:
    return float(np.sqrt((W * W).sum(axis=1)).sum())


def hybrid_graph(state: ModelState, params: HyperParams) -> np.ndarray:
    H = state.G.to_dense()
    eta = params.effective_eta
    if state.S is not None and eta:
        H = H + eta * state.S.to_dense()
    return H


def view_residuals(state: ModelState, dataset: MultiViewDataset, params: HyperParams) -> np.ndarray:
    """z_v = ||X_v - W_v C A||_F^2 + gamma ||W_v||_21 + Tr(X_v L_G X_v^T) for every view."""
    CA = state.C @ state.A
    z = np.empty(dataset.n_views)
    for v, X in enumerate(dataset.views):
        R = X - state.W[v] @ CA
        z[v] = np.sum(R * R) + params.gamma * l21_norm(state.W[v]) + 0.5 * state.G.edge_sum(X)
    return z


def objective_terms(state: ModelState, dataset: MultiViewDataset, params: HyperParams) -> dict:
    CA = state.C @ state.A
    recon = smooth = l21 = 0.0
    weighted = 0.0
    for v, X in enumerate(dataset.views):
        R = X - state.W[v] @ CA
        r = float(np.sum(R * R))
        s = 0.5 * state.G.edge_sum(X)
        w = l21_norm(state.W[v])
        a2 = float(state.alpha[v]) ** 2
        recon += a2 * r
        smooth += a2 * s
        l21 += a2 * params.gamma * w
        weighted += a2 * (r + s + params.gamma * w)
    Ft = state.F.T
    terms = {
        "reconstruction": recon,
        "view_smoothness": smooth,
        "l21": l21,
        "ridge_A": params.beta * float(np.sum(state.A * state.A)),
        "spectral_G": 0.5 * state.G.edge_sum(Ft),
        "reg_G": float(np.dot(state.lambda_G, state.G.row_sq_norms())),
        "anchor_smoothness": 0.0,
        "spectral_S": 0.0,
        "reg_S": 0.0,
    }
    if state.S is not None:
        terms["anchor_smoothness"] = state.S.edge_sum(state.A)
        terms["spectral_S"] = 0.5 * params.effective_eta * state.S.edge_sum(Ft)
        terms["reg_S"] = float(np.dot(state.lambda_S, state.S.row_sq_norms()))
    return terms


def objective(state: ModelState, dataset: MultiViewDataset, params: HyperParams) -> float:
    """Full objective; the lambda terms use the per-row values recorded in ``state``."""
    if len(state.W) != dataset.n_views or state.A.shape[1] != dataset.n_samples:
        raise ValidationError("state does not match dataset dimensions")
    return float(sum(objective_terms(state, dataset, params).values()))


# ---------------------------------------------------------------------------
# updates


def reweighting(W: np.ndarray, epsilon: float) -> np.ndarray:
    """Diagonal of D with D_ii = 1 / (2 sqrt(||W_i||^2 + eps))."""
    return 0.5 / np.sqrt((W * W).sum(axis=1) + epsilon)


def w_subproblem(state: ModelState, dataset: MultiViewDataset, params: HyperParams, v: int) -> GpiProblem:
    X = dataset.views[v]
    lin = X @ (state.C @ state.A).T
    return GpiProblem(quad=params.gamma * state.D[v], lin=lin, init=state.W[v])


def update_W(state: ModelState, dataset: MultiViewDataset, params: HyperParams):
    """Recompute D from the current W, then solve each view's trace problem with GPI.

    Returns ``(W, D)`` where ``D`` is the reweighting used.
    """
    D = tuple(reweighting(W, params.epsilon) for W in state.W)
    tmp = state.replace(D=D)
    W_new = []
    for v in range(dataset.n_views):
        problem = w_subproblem(tmp, dataset, params, v)
        W, _ = gpi_orthogonal(problem, tol=params.gpi_tol, max_iters=params.gpi_max_iters)
        W_new.append(W)
    return tuple(W_new), D


def a_system(state: ModelState, dataset: MultiViewDataset, params: HyperParams):
    """P and Q of the A-subproblem min Tr(P A^T A - Q A)."""
    n = dataset.n_samples
    a2 = state.alpha**2
    P = (a2.sum() + params.beta) * np.eye(n)
    if state.S is not None:
        P += 2.0 * symmetric_laplacian(state.S.to_dense())
    Q = sum(2.0 * a2[v] * (X.T @ state.W[v] @ state.C) for v, X in enumerate(dataset.views))
    return P, Q


def a_subproblem_value(A: np.ndarray, P: np.ndarray, Q: np.ndarray) -> float:
    return float(np.sum((A @ P) * A) - np.sum(Q * A.T))


def relaxed_A(state: ModelState, dataset: MultiViewDataset, params: HyperParams) -> np.ndarray:
    P, Q = a_system(state, dataset, params)
    # stationarity 2 A P = Q^T, with P symmetric
    return spd_solve(P, 0.5 * Q).T


def update_A(state: ModelState, dataset: MultiViewDataset, params: HyperParams) -> np.ndarray:
    """Unconstrained stationary point, then column-wise simplex projection."""
    return project_columns_to_simplex(relaxed_A(state, dataset, params))


def c_matrix(state: ModelState, dataset: MultiViewDataset) -> np.ndarray:
    a2 = state.alpha**2
    return sum(2.0 * a2[v] * (state.W[v].T @ X @ state.A.T) for v, X in enumerate(dataset.views))


def update_C(state: ModelState, dataset: MultiViewDataset, params: HyperParams) -> np.ndarray:
    return procrustes_max_trace(c_matrix(state, dataset))


def s_costs(state: ModelState, params: HyperParams) -> np.ndarray:
    """U_ij = ||A_i - A_j||^2 + (eta/2) ||F_i - F_j||^2."""
    U = pairwise_sq_dists(state.A)
    if params.effective_eta:
        U += 0.5 * params.effective_eta * pairwise_sq_dists(state.F.T)
    return U


def g_costs(state: ModelState, dataset: MultiViewDataset, params: HyperParams) -> np.ndarray:
    """B_ij = (sum_v alpha_v^2 ||X_v,i - X_v,j||^2 + ||F_i - F_j||^2) / 2."""
    mats = list(dataset.views) + [state.F.T]
    weights = list(state.alpha**2) + [1.0]
    return 0.5 * pairwise_sq_dists(mats, weights)


def update_S(state: ModelState, params: HyperParams):
    """Returns ``(S, lambda_S)``; ``(None, zeros)`` when the second-order graph is disabled."""
    if params.disable_second_order:
        return None, np.zeros(state.A.shape[1])
    return ksparse_graph(s_costs(state, params), params.k)


def update_G(state: ModelState, dataset: MultiViewDataset, params: HyperParams):
    """Returns ``(G, lambda_G)``."""
    return ksparse_graph(g_costs(state, dataset, params), params.k)


def update_F(state: ModelState, params: HyperParams) -> np.ndarray:
    L = symmetric_laplacian(hybrid_graph(state, params))
    F, _ = smallest_eigvecs(L, params.c)
    return F


def update_alpha(state: ModelState, dataset: MultiViewDataset, params: HyperParams) -> np.ndarray:
    z = view_residuals(state, dataset, params)
    if np.any(z <= 1e-300):
        v = int(np.argmin(z))
        raise NumericalError(f"degenerate view residual in view {v} (z={z[v]:.3g})")
    inv = 1.0 / z
    return inv / inv.sum()


# ---------------------------------------------------------------------------
# driver


def prepare(dataset: MultiViewDataset, params: HyperParams):
    """Validate and (optionally) standardize; returns ``(dataset, zero_variance_features)``."""
    validate(dataset, params)
    if params.standardize:
        return zscore(dataset)
    return dataset, ()


def initialize(dataset: MultiViewDataset, params: HyperParams) -> ModelState:
    """Initial state: kNN graph G, random feasible A, C and S, D = I, uniform alpha."""
    rng = np.random.default_rng(params.seed)
    n, l, m, c, k = dataset.n_samples, dataset.n_views, params.m, params.c, params.k

    G, lam_knn = init_knn_graph(dataset, k)
    # the kNN costs are plain distances; with uniform alpha and no F term the
    # G-step costs are those distances scaled by 1 / (2 l^2)
    lambda_G = lam_knn / (2.0 * l * l)

    A = project_columns_to_simplex(rng.uniform(size=(m, n)))
    C = procrustes_max_trace(rng.standard_normal((c, m)))
    if params.disable_second_order:
        S, lambda_S = None, np.zeros(n)
    else:
        S, lambda_S = ksparse_graph(rng.uniform(size=(n, n)), k)
    alpha = np.full(l, 1.0 / l)
    D = tuple(np.ones(d) for d in dataset.dims)

    CA = C @ A
    W = []
    for v, X in enumerate(dataset.views):
        lin = X @ CA.T
        U, _, Vt = np.linalg.svd(lin, full_matrices=False)
        problem = GpiProblem(quad=params.gamma * D[v], lin=lin, init=U @ Vt)
        W.append(gpi_orthogonal(problem, tol=params.gpi_tol, max_iters=params.gpi_max_iters)[0])

    F0 = np.zeros((n, c))
    state = ModelState(W=W, A=A, C=C, S=S, G=G, F=F0, alpha=alpha, D=D,
                       lambda_S=lambda_S, lambda_G=lambda_G)
    return state.replace(F=update_F(state, params))


def _apply_step(step, state, dataset, params):
    if step == "W":
        W, D = update_W(state, dataset, params)
        return state.replace(W=W, D=D)
    if step == "A":
        return state.replace(A=update_A(state, dataset, params))
    if step == "C":
        return state.replace(C=update_C(state, dataset, params))
    if step == "S":
        S, lam = update_S(state, params)
        return state.replace(S=S, lambda_S=lam)
    if step == "G":
        G, lam = update_G(state, dataset, params)
        return state.replace(G=G, lambda_G=lam)
    if step == "F":
        return state.replace(F=update_F(state, params))
    if step == "alpha":
        return state.replace(alpha=update_alpha(state, dataset, params))
    raise ValueError(step)


def fit(
    dataset: MultiViewDataset,
    params: HyperParams,
    record_steps: bool = True,
    callback: Optional[Callable[[int, ModelState], None]] = None,
) -> FitResult:
    """Run the alternating optimizer and rank all features.

    ``callback(iteration, state)`` is invoked after every outer iteration.
    """
    t0 = time.perf_counter()
    data, zero_var = prepare(dataset, params)
    try:
        state = initialize(data, params)
        value = objective(state, data, params)
    except (NumericalError, ValidationError, np.linalg.LinAlgError) as exc:
        raise FitError(0, "init", exc) from exc
    trace = [value]
    log = [StepRecord(0, "init", value)]
    converged = False
    it = 0
    for it in range(1, params.max_outer_iters + 1):
        for step in STEPS:
            try:
                new = _apply_step(step, state, data, params)
            except (NumericalError, ValidationError, np.linalg.LinAlgError) as exc:
                raise FitError(it, step, exc) from exc
            if record_steps:
                retuned = None
                if step == "S" and new.S is not None:
                    retuned = objective(state.replace(lambda_S=new.lambda_S), data, params)
                elif step == "G":
                    retuned = objective(state.replace(lambda_G=new.lambda_G), data, params)
                log.append(StepRecord(it, step, objective(new, data, params), retuned))
            state = new
        value = objective(state, data, params)
        if not math.isfinite(value):
            raise FitError(it, "objective", NumericalError("objective is not finite"))
        prev = trace[-1]
        trace.append(value)
        if callback is not None:
            callback(it, state)
        if abs(prev - value) <= params.rel_tol * abs(prev):
            converged = True
            break
    state = state.replace(objective_trace=tuple(trace))
    return FitResult(
        state=state,
        ranking=feature_ranking(state.W),
        converged=converged,
        iterations=it,
        objective_trace=tuple(trace),
        step_log=tuple(log),
        params=params,
        zero_variance_features=tuple(zero_var),
        wallclock=time.perf_counter() - t0,
    )


def feature_ranking(W) -> tuple:
    """All (view, index) pairs by descending row norm of W; ties by (view, index)."""
    norms, views, idx = [], [], []
    for v, Wv in enumerate(W):
        norms.append(np.sqrt((np.asarray(Wv) ** 2).sum(axis=1)))
        views.append(np.full(Wv.shape[0], v))
        idx.append(np.arange(Wv.shape[0]))
    norms, views, idx = map(np.concatenate, (norms, views, idx))
    order = np.lexsort((idx, views, -norms))
    return tuple((int(views[i]), int(idx[i])) for i in order)


def select_features(result, ratio: Optional[float] = None, h: Optional[int] = None) -> list:
    """Top features of a :class:`FitResult` (or a ranking sequence).

    Exactly one of ``ratio`` (0 < ratio <= 1, h = ceil(ratio * total)) or
    ``h`` must be given.
    """
    ranking = result.ranking if hasattr(result, "ranking") else tuple(result)
    total = len(ranking)
    if (ratio is None) == (h is None):
        raise ValueError("give exactly one of ratio or h")
    if ratio is not None:
        if not 0 < ratio <= 1:
            raise ValueError(f"ratio must be in (0, 1], got {ratio}")
        h = math.ceil(round(ratio * total, 9))
    if not 1 <= h <= total:
        raise ValueError(f"h must be in [1, {total}], got {h}")
    return list(ranking[:h])
