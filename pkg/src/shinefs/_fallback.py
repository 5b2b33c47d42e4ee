"""Pure-numpy versions of the compiled kernels in ``_kernels.pyx``.

Both implementations share one contract; the Cython build is preferred at
import time and this module is used when it is unavailable or when
``SHINEFS_PURE_PYTHON`` is set.
"""

import numpy as np


def ksparse_rows(costs, k, exclude):
    costs = np.asarray(costs, dtype=np.float64)
    n_rows = costs.shape[0]
    masked = costs.copy()
    rows = np.flatnonzero(exclude >= 0)
    masked[rows, exclude[rows]] = np.inf
    order = np.argsort(masked, axis=1, kind="stable")[:, : k + 1]
    u = np.take_along_axis(masked, order, axis=1)
    # cumsum accumulates left to right, matching the compiled loop bit for bit
    s = np.cumsum(u[:, :k], axis=1)[:, -1]
    denom = k * u[:, k] - s
    degenerate = denom <= 1e-15
    safe = np.where(degenerate, 1.0, denom)
    w = (u[:, k : k + 1] - u[:, :k]) / safe[:, None]
    w[degenerate] = 1.0 / k
    lam = np.where(degenerate, 0.0, denom / 2.0)
    idx = np.ascontiguousarray(order[:, :k], dtype=np.intp)
    return idx, np.ascontiguousarray(w), lam.reshape(n_rows)


def project_simplex_columns(M):
    M = np.asarray(M, dtype=np.float64)
    m = M.shape[0]
    u = -np.sort(-M, axis=0)
    css = np.cumsum(u, axis=0)
    j = np.arange(1, m + 1, dtype=np.float64)[:, None]
    cond = u - (css - 1.0) / j > 0
    # last index where the condition holds; index 0 always qualifies
    rho = m - 1 - np.argmax(cond[::-1], axis=0)
    rho = np.where(cond.any(axis=0), rho, 0)
    css_rho = np.take_along_axis(css, rho[None, :], axis=0)[0]
    tau = (css_rho - 1.0) / (rho + 1)
    return np.maximum(M - tau[None, :], 0.0)


def lloyd_assign(X, centers):
    d2 = ((X[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
    labels = np.argmin(d2, axis=1).astype(np.intp)
    return labels, d2[np.arange(X.shape[0]), labels]
