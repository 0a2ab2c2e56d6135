# cython: language_level=3
"""Compiled Kalman recursion for small dense systems.

Mirrors ``_kernels_py.filter_run`` step for step. All matrices are
C-contiguous float64; the state and measurement dimensions are expected to
be small (n, p <= ~10), so plain loops beat BLAS call overhead.
"""

import numpy as np
from numpy.linalg import LinAlgError

from libc.math cimport sqrt, NAN


cdef int _cholesky(const double[:, ::1] S, double[:, ::1] L, int p) noexcept nogil:
    cdef int i, j, k
    cdef double s
    for i in range(p):
        for j in range(p):
            L[i, j] = 0.0
    for j in range(p):
        s = S[j, j]
        for k in range(j):
            s -= L[j, k] * L[j, k]
        if not s > 0.0:
            return -1
        L[j, j] = sqrt(s)
        for i in range(j + 1, p):
            s = S[i, j]
            for k in range(j):
                s -= L[i, k] * L[j, k]
            L[i, j] = s / L[j, j]
    return 0


cdef void _forward(double[:, ::1] L, double[::1] b, double[::1] x, int p) noexcept nogil:
    cdef int i, k
    cdef double s
    for i in range(p):
        s = b[i]
        for k in range(i):
            s -= L[i, k] * x[k]
        x[i] = s / L[i, i]


cdef void _backward(double[:, ::1] L, double[::1] b, double[::1] x, int p) noexcept nogil:
    # solves L^T x = b
    cdef int i, k
    cdef double s
    for i in range(p - 1, -1, -1):
        s = b[i]
        for k in range(i + 1, p):
            s -= L[k, i] * x[k]
        x[i] = s / L[i, i]


def filter_run(
    const double[:, ::1] A,
    const double[:, ::1] B,
    const double[:, ::1] C,
    const double[:, ::1] R,
    const double[:, ::1] Q,
    const double[::1] mu0,
    const double[:, ::1] P0,
    const double[:, ::1] U,
    const double[:, ::1] Y,
    const unsigned char[::1] has_y,
):
    cdef int T = U.shape[0]
    cdef int n = A.shape[0]
    cdef int m = B.shape[1]
    cdef int p = C.shape[0]
    cdef int t, i, j, k
    cdef double s, q
    cdef int failed_at = -1

    means_a = np.empty((T, n))
    covs_a = np.empty((T, n, n))
    innov_a = np.full((T, p), np.nan)
    S_a = np.full((T, p, p), np.nan)
    nis_a = np.full(T, np.nan)
    cdef double[:, ::1] means = means_a
    cdef double[:, :, ::1] covs = covs_a
    cdef double[:, ::1] innov = innov_a
    cdef double[:, :, ::1] S_out = S_a
    cdef double[::1] nis = nis_a

    cdef double[::1] mu = np.array(mu0, dtype=np.float64)
    cdef double[::1] mu_bar = np.empty(n)
    cdef double[:, ::1] P = np.array(P0, dtype=np.float64)
    cdef double[:, ::1] AP = np.empty((n, n))
    cdef double[:, ::1] Pb = np.empty((n, n))
    cdef double[:, ::1] CP = np.empty((p, n))
    cdef double[:, ::1] S = np.empty((p, p))
    cdef double[:, ::1] L = np.empty((p, p))
    cdef double[:, ::1] Kt = np.empty((p, n))
    cdef double[:, ::1] IKC = np.empty((n, n))
    cdef double[::1] col = np.empty(p)
    cdef double[::1] tmp = np.empty(p)
    cdef double[::1] nu = np.empty(p)
    cdef double[::1] w = np.empty(p)

    with nogil:
        for t in range(T):
            # predict
            for i in range(n):
                s = 0.0
                for j in range(n):
                    s += A[i, j] * mu[j]
                q = 0.0
                for j in range(m):
                    q += B[i, j] * U[t, j]
                mu_bar[i] = s + q
            for i in range(n):
                for j in range(n):
                    s = 0.0
                    for k in range(n):
                        s += A[i, k] * P[k, j]
                    AP[i, j] = s
            for i in range(n):
                for j in range(n):
                    s = 0.0
                    for k in range(n):
                        s += AP[i, k] * A[j, k]
                    Pb[i, j] = R[i, j] + s
            for i in range(n):
                for j in range(i + 1, n):
                    s = 0.5 * (Pb[i, j] + Pb[j, i])
                    Pb[i, j] = s
                    Pb[j, i] = s

            if has_y[t]:
                # innovation covariance S = Q + C Pb C^T
                for i in range(p):
                    for j in range(n):
                        s = 0.0
                        for k in range(n):
                            s += C[i, k] * Pb[k, j]
                        CP[i, j] = s
                for i in range(p):
                    for j in range(p):
                        s = 0.0
                        for k in range(n):
                            s += CP[i, k] * C[j, k]
                        S[i, j] = Q[i, j] + s
                for i in range(p):
                    for j in range(i + 1, p):
                        s = 0.5 * (S[i, j] + S[j, i])
                        S[i, j] = s
                        S[j, i] = s
                if _cholesky(S, L, p) != 0:
                    failed_at = t
                    break
                # K^T = S^-1 (C Pb), column by column
                for j in range(n):
                    for i in range(p):
                        col[i] = CP[i, j]
                    _forward(L, col, tmp, p)
                    _backward(L, tmp, col, p)
                    for i in range(p):
                        Kt[i, j] = col[i]
                for i in range(p):
                    s = 0.0
                    for k in range(n):
                        s += C[i, k] * mu_bar[k]
                    nu[i] = Y[t, i] - s
                for i in range(n):
                    s = 0.0
                    for k in range(p):
                        s += Kt[k, i] * nu[k]
                    mu[i] = mu_bar[i] + s
                # P = (I - K C) Pb
                for i in range(n):
                    for j in range(n):
                        s = 0.0
                        for k in range(p):
                            s += Kt[k, i] * C[k, j]
                        IKC[i, j] = (1.0 if i == j else 0.0) - s
                for i in range(n):
                    for j in range(n):
                        s = 0.0
                        for k in range(n):
                            s += IKC[i, k] * Pb[k, j]
                        P[i, j] = s
                for i in range(n):
                    for j in range(i + 1, n):
                        s = 0.5 * (P[i, j] + P[j, i])
                        P[i, j] = s
                        P[j, i] = s
                _forward(L, nu, w, p)
                s = 0.0
                for i in range(p):
                    s += w[i] * w[i]
                    innov[t, i] = nu[i]
                    for j in range(p):
                        S_out[t, i, j] = S[i, j]
                nis[t] = s
            else:
                for i in range(n):
                    mu[i] = mu_bar[i]
                    for j in range(n):
                        P[i, j] = Pb[i, j]
            for i in range(n):
                means[t, i] = mu[i]
                for j in range(n):
                    covs[t, i, j] = P[i, j]

    if failed_at >= 0:
        raise LinAlgError(f"innovation covariance not positive definite at row {failed_at}")
    return means_a, covs_a, innov_a, S_a, nis_a
