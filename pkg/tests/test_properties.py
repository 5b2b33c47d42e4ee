"""Property-based checks of the invariants that every input must satisfy."""

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from shinefs.evaluation import accuracy, nmi
from shinefs.graph import ksparse_graph, ksparse_simplex_row, pairwise_sq_dists, project_columns_to_simplex, symmetric_laplacian
from shinefs.model import HyperParams
from shinefs.optimizer import feature_ranking, select_features
from shinefs.subsolvers import procrustes_max_trace

finite = st.floats(-1e3, 1e3, allow_nan=False, allow_infinity=False)


@settings(max_examples=200, deadline=None)
@given(arrays(np.float64, st.integers(3, 12), elements=st.floats(0, 10, allow_nan=False)), st.data())
def test_ksparse_row_invariants(costs, data):
    n = costs.size
    k = data.draw(st.integers(1, n - 2))
    ex = data.draw(st.integers(-1, n - 1))
    sol = ksparse_simplex_row(costs, k, exclude=ex)
    assert abs(sol.weights.sum() - 1.0) < 1e-9
    assert np.all(sol.weights >= 0) and np.count_nonzero(sol.weights) <= k
    assert sol.lam >= 0
    if ex >= 0:
        assert sol.weights[ex] == 0
    # chosen neighbours are among the k cheapest admissible costs
    chosen = sorted(costs[sol.neighbor_ids])
    others = np.delete(costs, list(sol.neighbor_ids) + ([ex] if ex >= 0 else []))
    assert chosen[-1] <= others.min()


@settings(max_examples=100, deadline=None)
@given(arrays(np.float64, st.tuples(st.integers(1, 6), st.integers(1, 8)), elements=finite))
def test_simplex_projection_properties(M):
    P = project_columns_to_simplex(M)
    assert np.all(P >= 0)
    np.testing.assert_allclose(P.sum(axis=0), 1.0, atol=1e-9)
    # idempotent and order preserving within a column
    np.testing.assert_allclose(project_columns_to_simplex(P), P, atol=1e-12)
    for j in range(M.shape[1]):
        order = np.argsort(M[:, j], kind="stable")
        assert np.all(np.diff(P[order, j]) >= -1e-12)


@settings(max_examples=60, deadline=None)
@given(arrays(np.float64, st.tuples(st.integers(1, 4), st.integers(4, 9)), elements=st.floats(-10, 10)), st.data())
def test_graph_rows(M, data):
    n = M.shape[1]
    k = data.draw(st.integers(1, n - 2))
    G, lam = ksparse_graph(pairwise_sq_dists(M), k)
    D = G.to_dense()
    assert np.all(np.diag(D) == 0)
    np.testing.assert_allclose(D.sum(axis=1), 1.0, atol=1e-9)
    L = symmetric_laplacian(D)
    np.testing.assert_allclose(L.sum(axis=1), 0.0, atol=1e-12)
    assert np.linalg.eigvalsh(L).min() > -1e-10


@settings(max_examples=100, deadline=None)
@given(arrays(np.float64, st.tuples(st.integers(2, 5), st.integers(1, 5)), elements=st.floats(-5, 5)))
def test_procrustes_properties(E):
    c, m = E.shape
    if m > c:
        E = E.T
        c, m = m, c
    C = procrustes_max_trace(E)
    np.testing.assert_allclose(C.T @ C, np.eye(m), atol=1e-10)
    assert abs(np.trace(C.T @ E) - np.linalg.svd(E, compute_uv=False).sum()) < 1e-9


labelings = st.integers(1, 12).flatmap(
    lambda n: st.tuples(st.lists(st.integers(0, 3), min_size=n, max_size=n),
                        st.lists(st.integers(0, 3), min_size=n, max_size=n),
                        st.permutations(range(4)))
)


@settings(max_examples=200, deadline=None)
@given(labelings)
def test_metrics_label_permutation(case):
    truth, pred, perm = case
    permuted = [perm[p] for p in pred]
    assert accuracy(truth, pred) == accuracy(truth, permuted)
    assert abs(nmi(truth, pred) - nmi(truth, permuted)) < 1e-12
    assert abs(nmi(truth, pred) - nmi(pred, truth)) < 1e-12
    assert 0 <= nmi(truth, pred) <= 1 and 0 < accuracy(truth, pred) <= 1


@settings(max_examples=100, deadline=None)
@given(st.lists(st.integers(1, 6), min_size=1, max_size=4), st.data())
def test_selection_prefix(dims, data):
    rng = np.random.default_rng(data.draw(st.integers(0, 2**32 - 1)))
    ranking = feature_ranking([rng.standard_normal((d, 2)) for d in dims])
    total = sum(dims)
    assert sorted(ranking) == sorted((v, j) for v, d in enumerate(dims) for j in range(d))
    r = data.draw(st.floats(0.01, 1.0))
    sel = select_features(ranking, ratio=r)
    assert sel == list(ranking[: len(sel)])
    assert len(sel) >= r * total - 1e-9 and len(sel) - 1 < r * total + 1e-9


@settings(max_examples=100, deadline=None)
@given(st.integers(2, 8), st.integers(1, 8), st.integers(1, 10))
def test_hyperparams_m_c(c, m, k):
    if m > c:
        try:
            HyperParams(c=c, m=m, k=k)
        except ValueError as exc:
            assert "m must not exceed c" in str(exc)
        else:
            raise AssertionError("accepted m > c")
    else:
        assert HyperParams(c=c, m=m, k=k).m == m
