# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot loops; see ``_fallback.py`` for the reference numpy versions."""
import numpy as np
cimport numpy as cnp
from libc.math cimport fabs, isfinite
from libc.stdlib cimport malloc, free
from scipy.linalg.cython_lapack cimport dsyevd

cnp.import_array()


def block_counts(const cnp.int64_t[::1] rows, const cnp.int64_t[::1] cols,
                 const cnp.int64_t[::1] labels, Py_ssize_t K):
    cdef cnp.ndarray[cnp.float64_t, ndim=2] out = np.zeros((K, K))
    cdef double[:, ::1] C = out
    cdef Py_ssize_t e, a, b
    for e in range(rows.shape[0]):
        a = labels[rows[e]]
        b = labels[cols[e]]
        C[a, b] += 1.0
        if rows[e] != cols[e]:
            C[b, a] += 1.0
    return out


def admm_loop(const double[:, ::1] R, const double[:, ::1] N, double c, double rho1,
              double tau, double eps, long max_iters,
              double[:, ::1] W, double[:, ::1] V, double[:, ::1] Theta,
              double[::1] shrunk):
    cdef int K = R.shape[0]
    cdef int info = 0, lwork = -1, liwork = -1, ldk = K, iwq = 0
    cdef char jobz = b'V'
    cdef char uplo = b'L'
    cdef double wq
    cdef double *a = <double *> malloc(K * K * sizeof(double))
    cdef double *ev = <double *> malloc(K * sizeof(double))
    cdef double *den = <double *> malloc(K * K * sizeof(double))
    cdef int *active = <int *> malloc(K * sizeof(int))
    cdef double *work = NULL
    cdef int *iwork = NULL
    cdef Py_ssize_t i, j, k, m, n_active
    cdef long it = 0
    cdef double diff, w_change = np.inf, acc, wn, s, resid, r
    cdef bint converged = False
    if a == NULL or ev == NULL or den == NULL or active == NULL:
        free(a)
        free(ev)
        free(den)
        free(active)
        raise MemoryError()
    # workspace query (divide and conquer, as numpy's eigh)
    dsyevd(&jobz, &uplo, &K, a, &ldk, ev, &wq, &lwork, &iwq, &liwork, &info)
    lwork = max(<int> wq, 1 + 6 * K + 2 * K * K)
    liwork = max(iwq, 3 + 5 * K)
    work = <double *> malloc(lwork * sizeof(double))
    iwork = <int *> malloc(liwork * sizeof(int))
    try:
        if work == NULL or iwork == NULL:
            raise MemoryError()
        for i in range(K):
            for j in range(K):
                den[i * K + j] = 2.0 * c * N[i, j] + rho1
        while it < max_iters:
            it += 1
            diff = 0.0
            for i in range(K):
                for j in range(K):
                    wn = (2.0 * c * R[i, j] + rho1 * (V[i, j] + Theta[i, j])) / den[i * K + j]
                    diff += (wn - W[i, j]) * (wn - W[i, j])
                    W[i, j] = wn
            # symmetric part of W - Theta, column-major for LAPACK
            for i in range(K):
                for j in range(K):
                    a[i + j * K] = 0.5 * ((W[i, j] - Theta[i, j]) + (W[j, i] - Theta[j, i]))
            dsyevd(&jobz, &uplo, &K, a, &ldk, ev, work, &lwork, iwork, &liwork, &info)
            if info != 0:
                return it, w_change, False, int(info)
            n_active = 0
            for k in range(K):
                s = fabs(ev[k]) - tau
                if s > 0:
                    shrunk[k] = s if ev[k] > 0 else -s
                    active[n_active] = <int> k
                    n_active += 1
                else:
                    shrunk[k] = 0.0
            for i in range(K):
                for j in range(i, K):
                    acc = 0.0
                    for m in range(n_active):
                        k = active[m]
                        acc += shrunk[k] * a[i + k * K] * a[j + k * K]
                    V[i, j] = acc
                    V[j, i] = acc
            resid = 0.0
            for i in range(K):
                for j in range(K):
                    r = V[i, j] - W[i, j]
                    Theta[i, j] += r
                    resid += r * r
            w_change = diff / (<double> K * K)
            if not isfinite(w_change):
                return it, w_change, False, -1
            # a warm start sits on the previous fixed point, where the W step
            # does not move; the primal residual catches the new penalty
            if w_change <= eps and resid / (<double> K * K) <= eps:
                converged = True
                break
    finally:
        free(a)
        free(ev)
        free(den)
        free(active)
        free(work)
        free(iwork)
    return it, w_change, converged, 0
