"""Orthogonality-constrained and linear-algebra sub-solvers."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .model import NumericalError, ValidationError

LAMBDA_INFLATION = 1.0 + 1e-6


@dataclass(frozen=True, eq=False)
class GpiProblem:
    """min Tr(W^T quad W - 2 W^T lin) s.t. W^T W = I.

    ``quad`` is either a full symmetric ``(d, d)`` matrix or a length-``d``
    vector holding a diagonal.
    """

    quad: np.ndarray
    lin: np.ndarray
    init: np.ndarray

    def __post_init__(self):
        d, c = self.lin.shape
        if c > d:
            raise ValidationError(f"c={c} exceeds d={d}; no orthonormal d x c matrix exists")
        if self.init.shape != (d, c):
            raise ValidationError(f"init has shape {self.init.shape}, expected {(d, c)}")
        if self.quad.ndim == 2:
            if self.quad.shape != (d, d):
                raise ValidationError("quad must be d x d")
            if np.abs(self.quad - self.quad.T).max() > 1e-12:
                raise ValidationError("quad is not symmetric")
        elif self.quad.shape != (d,):
            raise ValidationError("diagonal quad must have length d")
        err = np.abs(self.init.T @ self.init - np.eye(c)).max()
        if err > 1e-8:
            raise ValidationError(f"init columns are not orthonormal (max error {err:.3g})")

    @property
    def diagonal(self) -> bool:
        return self.quad.ndim == 1

    def apply_quad(self, W: np.ndarray) -> np.ndarray:
        return self.quad[:, None] * W if self.diagonal else self.quad @ W

    def value(self, W: np.ndarray) -> float:
        return float(np.sum(W * self.apply_quad(W)) - 2.0 * np.sum(W * self.lin))


def _polar(M: np.ndarray) -> np.ndarray:
    U, _, Vt = np.linalg.svd(M, full_matrices=False)
    return U @ Vt


def _gpi_run(problem: GpiProblem, W: np.ndarray, lam: float, tol: float, max_iters: int):
    values = [problem.value(W)]
    for _ in range(max_iters):
        M = lam * W - problem.apply_quad(W) + problem.lin
        W = _polar(M)
        values.append(problem.value(W))
        prev, cur = values[-2], values[-1]
        if abs(prev - cur) <= tol * max(abs(prev), np.finfo(float).tiny):
            break
    return W, values


def _starts(problem: GpiProblem) -> list:
    """Deterministic extra starting points: the polar factor of ``lin`` and the
    bottom eigenvectors of ``quad`` (both sign choices, aligned with ``lin``)."""
    d, c = problem.lin.shape
    if problem.diagonal:
        order = np.argsort(problem.quad, kind="stable")[:c]
        V = np.zeros((d, c))
        V[order, np.arange(c)] = 1.0
    else:
        V = sla.eigh(problem.quad, subset_by_index=[0, c - 1])[1]
    s = np.sign(np.sum(V * problem.lin, axis=0))
    s[s == 0] = 1.0
    return [_polar(problem.lin), V * s, -V * s]


def gpi_orthogonal(problem: GpiProblem, tol: float = 1e-8, max_iters: int = 100, multistart: bool = True):
    """Generalized power iteration.

    Repeats M <- (lam I - quad) W + lin, W <- polar(M) where lam bounds the
    spectrum of quad from above; the subproblem value never increases along
    a run. The iteration can stop at a local minimum, so with ``multistart``
    it is also run from a few deterministic starts and the best end point
    wins (the run from ``problem.init`` wins ties). The result is therefore
    never worse than the plain run from ``problem.init``.

    Returns ``(W, values)``: the winning run's value after each iteration
    (index 0 is that run's starting value).
    """
    if problem.diagonal:
        top = float(problem.quad.max()) if problem.quad.size else 0.0
    else:
        top = float(sla.eigvalsh(problem.quad, subset_by_index=[problem.quad.shape[0] - 1] * 2)[0])
    lam = max(top, 0.0) * LAMBDA_INFLATION
    best = _gpi_run(problem, np.array(problem.init, dtype=np.float64), lam, tol, max_iters)
    if multistart:
        for W0 in _starts(problem):
            run = _gpi_run(problem, W0, lam, tol, max_iters)
            if run[1][-1] < best[1][-1]:
                best = run
    return best


def procrustes_max_trace(E: np.ndarray) -> np.ndarray:
    """argmax Tr(C^T E) over C with orthonormal columns, E being c x m with m <= c."""
    E = np.asarray(E, dtype=np.float64)
    c, m = E.shape
    if m > c:
        raise ValidationError(f"m must not exceed c (m={m}, c={c})")
    U, _, Vt = np.linalg.svd(E, full_matrices=True)
    return U[:, :m] @ Vt


def smallest_eigvecs(L: np.ndarray, c: int):
    """Eigenvectors of the ``c`` algebraically smallest eigenvalues of symmetric ``L``.

    Columns are ordered by ascending eigenvalue; each column's
    largest-magnitude entry (first one on ties) is made positive.
    Returns ``(F, eigenvalues)``.
    """
    L = np.asarray(L, dtype=np.float64)
    n = L.shape[0]
    if L.shape != (n, n):
        raise ValidationError("L must be square")
    if not 1 <= c <= n:
        raise ValidationError(f"c={c} out of range for n={n}")
    scale = max(1.0, float(np.abs(L).max()))
    if np.abs(L - L.T).max() > 1e-10 * scale:
        raise ValidationError("L is not symmetric")
    vals, vecs = sla.eigh(L, subset_by_index=[0, c - 1], driver="evr")
    pivots = np.argmax(np.abs(vecs), axis=0)
    signs = np.sign(vecs[pivots, np.arange(c)])
    signs[signs == 0] = 1.0
    return vecs * signs, vals


def spd_solve(P: np.ndarray, rhs: np.ndarray, max_cond: float = 1e12) -> np.ndarray:
    """Solve P Z = rhs for symmetric positive-definite P via Cholesky."""
    P = np.asarray(P, dtype=np.float64)
    try:
        factor, lower = sla.cho_factor(P, lower=False, check_finite=True)
    except sla.LinAlgError as exc:
        raise NumericalError(f"matrix is not positive definite: {exc}") from exc
    anorm = np.abs(P).sum(axis=0).max()
    rcond, info = sla.lapack.dpocon(factor, anorm, uplo="U")
    if info != 0 or rcond * max_cond < 1.0:
        raise NumericalError(f"ill-conditioned system (condition estimate {1.0 / max(rcond, 1e-300):.3g})")
    return sla.cho_solve((factor, lower), rhs)
