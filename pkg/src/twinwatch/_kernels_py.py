"""Pure numpy kernels. Reference implementation and fallback for ``_kernels.pyx``."""

import numpy as np
from scipy.linalg import cho_factor, cho_solve, solve_triangular


def filter_run(A, B, C, R, Q, mu0, P0, U, Y, has_y):
    T = U.shape[0]
    n = A.shape[0]
    p = C.shape[0]
    means = np.empty((T, n))
    covs = np.empty((T, n, n))
    innov = np.full((T, p), np.nan)
    S_out = np.full((T, p, p), np.nan)
    nis = np.full(T, np.nan)
    I = np.eye(n)
    mu = np.array(mu0, dtype=float)
    P = np.array(P0, dtype=float)
    for t in range(T):
        mu = A @ mu + B @ U[t]
        P = R + A @ P @ A.T
        P = 0.5 * (P + P.T)
        if has_y[t]:
            S = Q + C @ P @ C.T
            S = 0.5 * (S + S.T)
            L, lower = cho_factor(S, lower=True)
            Kt = cho_solve((L, lower), C @ P)
            nu = Y[t] - C @ mu
            mu = mu + Kt.T @ nu
            P = (I - Kt.T @ C) @ P
            P = 0.5 * (P + P.T)
            w = solve_triangular(L, nu, lower=True)
            innov[t] = nu
            S_out[t] = S
            nis[t] = w @ w
        means[t] = mu
        covs[t] = P
    return means, covs, innov, S_out, nis
