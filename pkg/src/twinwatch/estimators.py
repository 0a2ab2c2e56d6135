"""Estimation without the recursive filter.

* ``propagate_mean_openloop``: push the belief mean through the model when no
  measurement is available.
* ``backsolve_hidden_state``: recover the unmeasured heater temperature from a
  single noise-free box measurement.
* ``batch_map_oracle``: maximize the joint posterior over the whole state
  path in one linear solve. Used to certify the Kalman recursion.

Exact-state estimation is plain simulation (``statespace.simulate``).
"""

from __future__ import annotations

from typing import Sequence

import numpy as np
from scipy.linalg import solve_triangular

from .errors import DimensionError, NotPositiveDefiniteError, UnobservableError
from .matgauss import Gaussian, as_vector, spd_factor, symmetrize
from .statespace import LinearDiscreteSystem, step

UNOBSERVABLE_TOL = 1e-12


def propagate_mean_openloop(x0_belief: Gaussian, sys: LinearDiscreteSystem, inputs: Sequence) -> list[np.ndarray]:
    if x0_belief.dim != sys.n:
        raise DimensionError(f"belief has dimension {x0_belief.dim}, expected {sys.n}")
    x = np.array(x0_belief.mean)
    out = []
    for u in inputs:
        x = step(sys, x, u)
        out.append(x)
    return out


def backsolve_hidden_state(sys: LinearDiscreteSystem, t_b0: float, u1, y1: float) -> tuple[np.ndarray, np.ndarray]:
    """Solve ``y1 = A21 T_h0 + A22 T_b0 + B21 P1 + B22 T_r1`` for ``T_h0``.

    Returns ``(x0, x1)`` with ``x1 = A x0 + B u1``.
    """
    if sys.n != 2 or sys.p != 1 or not np.array_equal(sys.C, [[0.0, 1.0]]):
        raise DimensionError("back-solve needs a two-state system measuring the second state")
    u1 = as_vector(u1, "u1")
    if u1.size != sys.m:
        raise DimensionError(f"input has length {u1.size}, expected {sys.m}")
    a21, a22 = sys.A[1]
    if abs(a21) <= UNOBSERVABLE_TOL:
        raise UnobservableError("A21 is zero: the heater temperature does not reach the measurement in one step")
    t_h0 = (float(y1) - a22 * t_b0 - float(sys.B[1] @ u1)) / a21
    x0 = np.array([t_h0, float(t_b0)])
    return x0, step(sys, x0, u1)


def batch_map_oracle(
    sys: LinearDiscreteSystem,
    prior: Gaussian,
    inputs: Sequence,
    measurements: Sequence,
) -> tuple[list[np.ndarray], Gaussian]:
    """Joint MAP path ``x_0..x_k`` and the marginal belief over ``x_k``.

    The negative log-posterior

        1/2 |x_0 - m_0|^2_{P_0^-1}
        + sum_j 1/2 |x_j - A x_{j-1} - B u_j|^2_{R^-1} + 1/2 |y_j - C x_j|^2_{Q^-1}

    is a linear least-squares problem in the stacked path. Its normal
    equations ``H z = b`` (``H`` block-tridiagonal) are solved in square-root
    form: the residuals are whitened by the Cholesky factors of ``P_0``, ``R``
    and ``Q`` and the stacked system is reduced by QR, so ``H = T^T T`` is
    never formed. With ``x_k`` ordered last, its covariance (the last block
    of ``H^-1``) is ``T_kk^-1 T_kk^-T``. Requires SPD ``R``, ``Q`` and prior
    covariance.
    """
    k = len(inputs)
    if k < 1:
        raise ValueError("need at least one step")
    if len(measurements) != k:
        raise DimensionError("inputs and measurements differ in length")
    n, p = sys.n, sys.p
    if prior.dim != n:
        raise DimensionError(f"prior has dimension {prior.dim}, expected {n}")
    try:
        WR = _whitener(sys.R)
        WQ = _whitener(sys.Q)
        WP = _whitener(prior.covariance)
    except NotPositiveDefiniteError as exc:
        raise NotPositiveDefiniteError(f"MAP oracle needs SPD noise and prior covariances: {exc}") from exc

    A, B, C = sys.A, sys.B, sys.C
    N = (k + 1) * n
    rows = n + k * (n + p)
    J = np.zeros((rows, N))
    r = np.zeros(rows)

    def blk(i):
        return slice(i * n, (i + 1) * n)

    J[:n, blk(0)] = WP
    r[:n] = WP @ prior.mean
    WRA = WR @ A
    WQC = WQ @ C
    row = n
    for j in range(1, k + 1):
        u = as_vector(inputs[j - 1], "u")
        y = as_vector(measurements[j - 1], "y")
        if u.size != sys.m or y.size != p:
            raise DimensionError(f"step {j}: input or measurement has the wrong length")
        # transition residual x_j - A x_{j-1} - B u_j
        J[row : row + n, blk(j)] = WR
        J[row : row + n, blk(j - 1)] = -WRA
        r[row : row + n] = WR @ (B @ u)
        row += n
        # measurement residual y_j - C x_j
        J[row : row + p, blk(j)] = WQC
        r[row : row + p] = WQ @ y
        row += p

    Qm, T = np.linalg.qr(J, mode="reduced")
    diag = np.abs(np.diag(T))
    if diag.min() <= 1e-14 * diag.max():
        raise NotPositiveDefiniteError("posterior Hessian is singular")
    z = solve_triangular(T, Qm.T @ r, lower=False)
    Tkk_inv = solve_triangular(T[blk(k), blk(k)], np.eye(n), lower=False)
    final_cov = symmetrize(Tkk_inv @ Tkk_inv.T)
    path = [z[blk(j)].copy() for j in range(k + 1)]
    return path, Gaussian(path[-1], final_cov)


def _whitener(m: np.ndarray) -> np.ndarray:
    """``L^-1`` for the Cholesky factor ``L`` of ``m``, so that ``|L^-1 e|^2 = e^T m^-1 e``."""
    L = spd_factor(m)
    return solve_triangular(L, np.eye(L.shape[0]), lower=True)
