"""Small dense matrix helpers and multivariate Gaussian primitives.

Matrices are plain 2-D float ``numpy`` arrays. Every function here is pure:
inputs are never modified in place.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from .errors import DimensionError, NotPositiveDefiniteError

SYMMETRY_TOL = 1e-9

SeedLike = Union[int, Sequence[int]]

_LOG_2PI = np.log(2.0 * np.pi)


def as_vector(x, name: str = "vector") -> np.ndarray:
    v = np.asarray(x, dtype=float)
    if v.ndim == 0:
        v = v.reshape(1)
    if v.ndim != 1:
        raise DimensionError(f"{name} must be one-dimensional, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise ValueError(f"{name} has non-finite entries")
    return v


def as_matrix(m, name: str = "matrix") -> np.ndarray:
    a = np.asarray(m, dtype=float)
    if a.ndim == 0:
        a = a.reshape(1, 1)
    if a.ndim != 2 or a.shape[0] < 1 or a.shape[1] < 1:
        raise DimensionError(f"{name} must be a non-empty 2-D array, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} has non-finite entries")
    return a


def symmetrize(m: np.ndarray) -> np.ndarray:
    return 0.5 * (m + m.T)


def check_symmetric(m: np.ndarray, name: str = "matrix", tol: float = SYMMETRY_TOL) -> np.ndarray:
    """Return ``m`` symmetrized, raising if it is not square or not symmetric within ``tol``.

    The tolerance is relative to the max-abs entry of ``m``.
    """
    if m.shape[0] != m.shape[1]:
        raise DimensionError(f"{name} must be square, got shape {m.shape}")
    scale = max(float(np.max(np.abs(m))), 1.0)
    if np.max(np.abs(m - m.T), initial=0.0) > tol * scale:
        raise NotPositiveDefiniteError(f"{name} is not symmetric")
    return symmetrize(m)


def is_psd(m: np.ndarray, tol: float = SYMMETRY_TOL) -> bool:
    """True when all eigenvalues of the symmetric part are >= -tol*||m||."""
    m = symmetrize(np.asarray(m, dtype=float))
    norm = float(np.linalg.norm(m, 2)) if m.size else 0.0
    return bool(np.min(np.linalg.eigvalsh(m)) >= -tol * max(norm, np.finfo(float).tiny))


def spd_factor(m) -> np.ndarray:
    """Lower-triangular Cholesky factor ``L`` with ``L @ L.T == m``.

    Inputs that are asymmetric within the symmetry tolerance are symmetrized
    first. Raises :class:`NotPositiveDefiniteError` for anything that is not
    strictly positive definite.
    """
    a = check_symmetric(as_matrix(m), "matrix")
    try:
        return np.linalg.cholesky(a)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefiniteError("matrix is not positive definite") from exc


def psd_sqrt(m) -> np.ndarray:
    """A factor ``L`` with ``L @ L.T == m`` that also accepts singular PSD input.

    Uses the Cholesky factor when it exists; otherwise falls back to the
    symmetric eigen-decomposition with negative round-off clipped to zero.
    """
    a = check_symmetric(as_matrix(m), "covariance")
    if not np.any(a):
        return np.zeros_like(a)
    try:
        return np.linalg.cholesky(a)
    except np.linalg.LinAlgError:
        pass
    w, v = np.linalg.eigh(a)
    norm = float(np.max(np.abs(w)))
    if w.min() < -SYMMETRY_TOL * norm:
        raise NotPositiveDefiniteError("covariance is not positive semi-definite")
    return v * np.sqrt(np.clip(w, 0.0, None))


def solve_spd(m, b) -> np.ndarray:
    """Solve ``m @ x = b`` for SPD ``m`` through its Cholesky factor."""
    from scipy.linalg import cho_solve

    L = spd_factor(m)
    return cho_solve((L, True), np.asarray(b, dtype=float))


@dataclass(frozen=True, eq=False)
class Gaussian:
    """Multivariate normal belief ``N(mean, covariance)``."""

    mean: np.ndarray
    covariance: np.ndarray

    def __post_init__(self):
        mean = as_vector(self.mean, "mean")
        cov = as_matrix(self.covariance, "covariance")
        if cov.shape != (mean.size, mean.size):
            raise DimensionError(
                f"covariance shape {cov.shape} does not match mean length {mean.size}"
            )
        cov = check_symmetric(cov, "covariance")
        if not is_psd(cov):
            raise NotPositiveDefiniteError("covariance is not positive semi-definite")
        mean.setflags(write=False)
        cov.setflags(write=False)
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "covariance", cov)

    @property
    def dim(self) -> int:
        return self.mean.size

    def marginal(self, index) -> "Gaussian":
        """Marginal over the state components in ``index``."""
        idx = np.atleast_1d(np.asarray(index, dtype=int))
        return Gaussian(self.mean[idx], self.covariance[np.ix_(idx, idx)])

    def __repr__(self):
        return f"Gaussian(mean={self.mean.tolist()}, covariance={self.covariance.tolist()})"


def mvn_logpdf(x, g: Gaussian) -> float:
    """Log density of ``g`` at ``x``.

    Evaluated through the Cholesky factor: the log-determinant is twice the
    sum of the log-diagonal and the quadratic form uses a triangular solve.
    """
    from scipy.linalg import solve_triangular

    x = as_vector(x, "x")
    if x.size != g.dim:
        raise DimensionError(f"x has length {x.size}, expected {g.dim}")
    L = spd_factor(g.covariance)
    z = solve_triangular(L, x - g.mean, lower=True)
    half_logdet = float(np.sum(np.log(np.diag(L))))
    return -0.5 * (g.dim * _LOG_2PI + float(z @ z)) - half_logdet


def mvn_pdf(x, g: Gaussian) -> float:
    return float(np.exp(mvn_logpdf(x, g)))


def rng_for(seed: SeedLike) -> np.random.Generator:
    """Generator seeded from an integer or a tuple of integers (a sub-stream key)."""
    if isinstance(seed, (int, np.integer)):
        entropy = int(seed)
    else:
        entropy = [int(s) for s in seed]
    return np.random.default_rng(np.random.SeedSequence(entropy))


def mvn_sample(g: Gaussian, seed: SeedLike) -> np.ndarray:
    """One draw ``mean + L z`` with ``z`` standard normal; deterministic in ``seed``."""
    L = psd_sqrt(g.covariance)
    z = rng_for(seed).standard_normal(g.dim)
    return g.mean + L @ z
