# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled inner loops. Semantics mirror ``_fallback`` exactly."""

import numpy as np

from libc.stdlib cimport malloc, free, qsort


cdef int _cmp_desc(const void* a, const void* b) noexcept nogil:
    cdef double x = (<const double*>a)[0]
    cdef double y = (<const double*>b)[0]
    if x > y:
        return -1
    if x < y:
        return 1
    return 0


def ksparse_rows(const double[:, ::1] costs, Py_ssize_t k, const Py_ssize_t[::1] exclude):
    cdef Py_ssize_t n_rows = costs.shape[0]
    cdef Py_ssize_t n = costs.shape[1]
    idx_arr = np.empty((n_rows, k), dtype=np.intp)
    w_arr = np.empty((n_rows, k), dtype=np.float64)
    lam_arr = np.empty(n_rows, dtype=np.float64)
    cdef Py_ssize_t[:, ::1] idx = idx_arr
    cdef double[:, ::1] w = w_arr
    cdef double[::1] lam = lam_arr

    cdef double* bval = <double*>malloc((k + 1) * sizeof(double))
    cdef Py_ssize_t* bidx = <Py_ssize_t*>malloc((k + 1) * sizeof(Py_ssize_t))
    if bval == NULL or bidx == NULL:
        free(bval)
        free(bidx)
        raise MemoryError()

    cdef Py_ssize_t r, j, p, pos, cnt
    cdef double v, s, denom
    try:
        with nogil:
            for r in range(n_rows):
                cnt = 0
                for j in range(n):
                    if j == exclude[r]:
                        continue
                    v = costs[r, j]
                    if cnt < k + 1:
                        pos = cnt
                        cnt += 1
                    elif v < bval[k]:
                        pos = k
                    else:
                        continue
                    # strict comparison keeps equal costs in ascending index order
                    while pos > 0 and bval[pos - 1] > v:
                        bval[pos] = bval[pos - 1]
                        bidx[pos] = bidx[pos - 1]
                        pos -= 1
                    bval[pos] = v
                    bidx[pos] = j
                s = 0.0
                for p in range(k):
                    s = s + bval[p]
                denom = k * bval[k] - s
                if denom <= 1e-15:
                    for p in range(k):
                        w[r, p] = 1.0 / k
                    lam[r] = 0.0
                else:
                    for p in range(k):
                        w[r, p] = (bval[k] - bval[p]) / denom
                    lam[r] = denom / 2.0
                for p in range(k):
                    idx[r, p] = bidx[p]
    finally:
        free(bval)
        free(bidx)
    return idx_arr, w_arr, lam_arr


def project_simplex_columns(const double[:, ::1] M):
    cdef Py_ssize_t m = M.shape[0]
    cdef Py_ssize_t n = M.shape[1]
    out_arr = np.empty((m, n), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef double* u = <double*>malloc(m * sizeof(double))
    if u == NULL:
        raise MemoryError()
    cdef Py_ssize_t i, j, rho
    cdef double css, css_rho, tau, x
    try:
        with nogil:
            for j in range(n):
                for i in range(m):
                    u[i] = M[i, j]
                qsort(u, m, sizeof(double), _cmp_desc)
                css = 0.0
                rho = 0
                css_rho = u[0]
                for i in range(m):
                    css = css + u[i]
                    if u[i] - (css - 1.0) / (i + 1) > 0:
                        rho = i
                        css_rho = css
                tau = (css_rho - 1.0) / (rho + 1)
                for i in range(m):
                    x = M[i, j] - tau
                    out[i, j] = x if x > 0 else 0.0
    finally:
        free(u)
    return out_arr


def lloyd_assign(const double[:, ::1] X, const double[:, ::1] centers):
    cdef Py_ssize_t n = X.shape[0]
    cdef Py_ssize_t p = X.shape[1]
    cdef Py_ssize_t c = centers.shape[0]
    labels_arr = np.empty(n, dtype=np.intp)
    d2_arr = np.empty(n, dtype=np.float64)
    cdef Py_ssize_t[::1] labels = labels_arr
    cdef double[::1] d2 = d2_arr
    cdef Py_ssize_t i, q, t, best
    cdef double acc, diff, bestd
    with nogil:
        for i in range(n):
            best = 0
            bestd = 0.0
            for q in range(c):
                acc = 0.0
                for t in range(p):
                    diff = X[i, t] - centers[q, t]
                    acc = acc + diff * diff
                if q == 0 or acc < bestd:
                    bestd = acc
                    best = q
            labels[i] = best
            d2[i] = bestd
    return labels_arr, d2_arr
