import numpy as np
import pytest
from scipy.stats import ortho_group

from shinefs.graph import symmetric_laplacian
from shinefs.model import NumericalError, ValidationError
from shinefs.subsolvers import GpiProblem, gpi_orthogonal, procrustes_max_trace, smallest_eigvecs, spd_solve

from oracles import gpi_angular_grid


def orthonormal(rng, d, c):
    return np.linalg.qr(rng.standard_normal((d, c)))[0]


class TestGpi:
    def test_zero_quad_is_procrustes(self, rng):
        lin = rng.standard_normal((5, 2))
        W, _ = gpi_orthogonal(GpiProblem(np.zeros(5), lin, orthonormal(rng, 5, 2)))
        np.testing.assert_allclose(W, procrustes_max_trace(lin), atol=1e-10)

    @pytest.mark.parametrize("b", [2.5, -0.7])
    def test_scalar(self, b):
        W, _ = gpi_orthogonal(GpiProblem(np.array([3.0]), np.array([[b]]), np.array([[1.0]])))
        assert W[0, 0] == np.sign(b)

    def test_orthonormal_lin_fixed_point(self, rng):
        lin = orthonormal(rng, 4, 4)
        W, _ = gpi_orthogonal(GpiProblem(np.full(4, 1e-12), lin, np.eye(4)))
        np.testing.assert_allclose(W, lin, atol=1e-9)

    @pytest.mark.parametrize("diagonal", [True, False])
    def test_angular_grid(self, rng, diagonal):
        for _ in range(20):
            if diagonal:
                quad = rng.uniform(0, 3, size=2)
                Q = np.diag(quad)
            else:
                B = rng.standard_normal((2, 2))
                Q = quad = B @ B.T
            lin = rng.standard_normal((2, 1))
            W, vals = gpi_orthogonal(GpiProblem(quad, lin, orthonormal(rng, 2, 1)), tol=0, max_iters=5000)
            _, best = gpi_angular_grid(Q, lin)
            assert vals[-1] - best < 1e-6
            assert np.all(np.diff(vals) <= 1e-12 * np.abs(vals[:-1]).max())

    def test_escapes_local_minimum(self):
        # a single run from this start stalls at a non-global stationary point
        quad = np.array([0.015067, 1.88581363])
        lin = np.array([[0.43365454], [0.27748366]])
        init = np.array([[-0.70280699], [-0.71138058]])
        init /= np.linalg.norm(init)
        p = GpiProblem(quad, lin, init)
        _, single = gpi_orthogonal(p, tol=0, max_iters=5000, multistart=False)
        _, multi = gpi_orthogonal(p, tol=0, max_iters=5000)
        _, best = gpi_angular_grid(np.diag(quad), lin)
        assert single[-1] - best > 1.0
        assert multi[-1] - best < 1e-6

    def test_never_worse_than_warm_start(self, rng):
        for _ in range(20):
            B = rng.standard_normal((6, 6))
            p = GpiProblem(B @ B.T, rng.standard_normal((6, 2)), orthonormal(rng, 6, 2))
            _, single = gpi_orthogonal(p, multistart=False)
            _, multi = gpi_orthogonal(p)
            assert multi[-1] <= single[-1]
            assert multi[-1] <= p.value(p.init)

    def test_values_non_increasing(self, rng):
        B = rng.standard_normal((8, 8))
        p = GpiProblem(B @ B.T, rng.standard_normal((8, 3)), orthonormal(rng, 8, 3))
        W, vals = gpi_orthogonal(p)
        assert np.all(np.diff(vals) <= 1e-12 * max(1.0, abs(vals[0])))
        np.testing.assert_allclose(W.T @ W, np.eye(3), atol=1e-10)

    def test_validation(self, rng):
        with pytest.raises(ValidationError, match="exceeds"):
            GpiProblem(np.ones(2), np.ones((2, 3)), np.ones((2, 3)))
        with pytest.raises(ValidationError, match="orthonormal"):
            GpiProblem(np.ones(3), np.ones((3, 1)), np.ones((3, 1)))
        with pytest.raises(ValidationError, match="symmetric"):
            GpiProblem(np.triu(np.ones((3, 3))), np.ones((3, 1)), np.eye(3)[:, :1])


class TestProcrustes:
    def test_identity(self):
        np.testing.assert_allclose(procrustes_max_trace(np.eye(2)), np.eye(2), atol=1e-12)

    def test_positive_diagonal(self):
        np.testing.assert_allclose(procrustes_max_trace(np.diag([2.0, 3.0])), np.eye(2), atol=1e-12)

    def test_random_sampling_and_singular_sum(self, rng):
        E = rng.standard_normal((3, 2))
        C = procrustes_max_trace(E)
        best = np.trace(C.T @ E)
        assert abs(best - np.linalg.svd(E, compute_uv=False).sum()) < 1e-10
        Qs = ortho_group.rvs(3, size=100000, random_state=7)[:, :, :2]
        assert np.einsum("kij,ij->k", Qs, E).max() <= best + 1e-12

    def test_wide_rejected(self):
        with pytest.raises(ValidationError, match="m must not exceed c"):
            procrustes_max_trace(np.ones((2, 3)))


class TestSmallestEigvecs:
    def test_components(self):
        g = np.zeros((6, 6))
        for block in ([0, 1, 2], [3, 4, 5]):
            for i in block:
                for j in block:
                    if i != j:
                        g[i, j] = 1.0
        F, vals = smallest_eigvecs(symmetric_laplacian(g), 2)
        assert np.all(np.abs(vals) < 1e-10)
        ind = np.array([[1, 1, 1, 0, 0, 0], [0, 0, 0, 1, 1, 1]], dtype=float).T / np.sqrt(3)
        # principal angles between the spans
        s = np.linalg.svd(F.T @ ind, compute_uv=False)
        assert np.arccos(np.clip(s.min(), -1, 1)) < 1e-6

    def test_diagonal(self):
        F, vals = smallest_eigvecs(np.diag([3.0, 1.0, 2.0]), 2)
        np.testing.assert_allclose(vals, [1, 2])
        np.testing.assert_allclose(F, np.eye(3)[:, [1, 2]], atol=1e-12)

    def test_residual(self, rng):
        B = rng.standard_normal((8, 8))
        L = B + B.T
        F, vals = smallest_eigvecs(L, 3)
        assert np.linalg.norm(L @ F - F * vals) < 1e-9
        np.testing.assert_allclose(vals, np.linalg.eigvalsh(L)[:3], atol=1e-10)

    def test_sign_convention(self, rng):
        B = rng.standard_normal((6, 6))
        F, _ = smallest_eigvecs(B + B.T, 3)
        piv = np.argmax(np.abs(F), axis=0)
        assert np.all(F[piv, range(3)] > 0)

    def test_errors(self):
        with pytest.raises(ValidationError):
            smallest_eigvecs(np.eye(3), 4)
        with pytest.raises(ValidationError, match="symmetric"):
            smallest_eigvecs(np.triu(np.ones((3, 3))), 1)


class TestSpdSolve:
    def test_identity(self, rng):
        r = rng.standard_normal((4, 2))
        np.testing.assert_allclose(spd_solve(np.eye(4), r), r)

    def test_scaled(self):
        np.testing.assert_allclose(spd_solve(2 * np.eye(3), np.ones(3)), 0.5 * np.ones(3))

    def test_residual(self, rng):
        B = rng.standard_normal((10, 10))
        P = B @ B.T + 10 * np.eye(10)
        r = rng.standard_normal((10, 3))
        Z = spd_solve(P, r)
        assert np.linalg.norm(P @ Z - r) / np.linalg.norm(r) < 1e-10

    def test_not_pd(self):
        with pytest.raises(NumericalError, match="positive definite"):
            spd_solve(-np.eye(2), np.ones(2))

    def test_ill_conditioned(self):
        with pytest.raises(NumericalError, match="ill-conditioned"):
            spd_solve(np.diag([1.0, 1e-14]), np.ones(2))
