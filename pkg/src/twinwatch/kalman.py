"""Kalman filter: prediction, gain, measurement update and the full recursion.

Per step, given the previous posterior ``(mu, P)``, input ``u`` and measurement ``y``::

    mu_bar = B u + A mu
    P_bar  = R + A P A^T
    K      = P_bar C^T (Q + C P_bar C^T)^-1
    mu     = mu_bar + K (y - C mu_bar)
    P      = (I - K C) P_bar

Covariances are symmetrized after every phase.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from . import _backend
from .errors import DimensionError, SingularInnovationError
from .matgauss import Gaussian, as_matrix, as_vector, symmetrize
from .statespace import LinearDiscreteSystem, step


@dataclass(frozen=True, eq=False)
class FilterState:
    """Posterior belief after step ``step``."""

    mean: np.ndarray
    covariance: np.ndarray
    step: int = 0

    def __post_init__(self):
        mean = as_vector(self.mean, "mean")
        cov = as_matrix(self.covariance, "covariance")
        if cov.shape != (mean.size, mean.size):
            raise DimensionError(f"covariance shape {cov.shape} does not match mean length {mean.size}")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "covariance", cov)

    @classmethod
    def from_gaussian(cls, g: Gaussian, step: int = 0) -> "FilterState":
        return cls(np.array(g.mean), np.array(g.covariance), step)

    def to_gaussian(self) -> Gaussian:
        return Gaussian(self.mean, self.covariance)

    def marginal(self, index) -> Gaussian:
        """Belief over a subset of the state, e.g. ``marginal(0)`` for the heater temperature."""
        return self.to_gaussian().marginal(index)

    def to_dict(self) -> dict:
        return {"mean": self.mean.tolist(), "cov": self.covariance.tolist(), "step": self.step}

    @classmethod
    def from_dict(cls, d: dict) -> "FilterState":
        return cls(d["mean"], d["cov"], int(d["step"]))

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "FilterState":
        return cls.from_dict(json.loads(text))


@dataclass(frozen=True, eq=False)
class PredictedState:
    mean: np.ndarray
    covariance: np.ndarray


@dataclass(frozen=True, eq=False)
class UpdateResult:
    posterior: FilterState
    gain: np.ndarray
    innovation: np.ndarray
    innovation_covariance: np.ndarray


def predict(prev: FilterState, sys: LinearDiscreteSystem, u) -> PredictedState:
    if prev.mean.size != sys.n:
        raise DimensionError(f"state has length {prev.mean.size}, expected {sys.n}")
    # Same arithmetic as the noise-free transition, so predict-only runs
    # reproduce open-loop propagation bit for bit.
    mean = step(sys, prev.mean, u)
    A = sys.A
    cov = symmetrize(sys.R + A @ prev.covariance @ A.T)
    return PredictedState(mean, cov)


def _factor_innovation(pred: PredictedState, sys: LinearDiscreteSystem):
    C = sys.C
    S = symmetrize(sys.Q + C @ pred.covariance @ C.T)
    try:
        factor = cho_factor(S, lower=True)
    except np.linalg.LinAlgError as exc:
        raise SingularInnovationError("innovation covariance is not positive definite") from exc
    return S, factor


def _gain_from_factor(pred: PredictedState, sys: LinearDiscreteSystem, factor) -> np.ndarray:
    # S is symmetric, so K^T = S^-1 (C P_bar).
    return cho_solve(factor, sys.C @ pred.covariance).T


def gain(pred: PredictedState, sys: LinearDiscreteSystem) -> np.ndarray:
    """Kalman gain ``P_bar C^T S^-1`` via a Cholesky solve against ``S``."""
    _, factor = _factor_innovation(pred, sys)
    return _gain_from_factor(pred, sys, factor)


def update(pred: PredictedState, sys: LinearDiscreteSystem, y) -> UpdateResult:
    y = as_vector(y, "y")
    if y.size != sys.p:
        raise DimensionError(f"measurement has length {y.size}, expected {sys.p}")
    S, factor = _factor_innovation(pred, sys)
    K = _gain_from_factor(pred, sys, factor)
    nu = y - sys.C @ pred.mean
    mean = pred.mean + K @ nu
    cov = symmetrize((np.eye(sys.n) - K @ sys.C) @ pred.covariance)
    return UpdateResult(
        posterior=FilterState(mean, cov),
        gain=K,
        innovation=nu,
        innovation_covariance=S,
    )


def kf_step(
    prev: FilterState, sys: LinearDiscreteSystem, u, y=None
) -> tuple[FilterState, Optional[UpdateResult]]:
    """Predict, then update when ``y`` is given; a missing ``y`` is a predict-only step."""
    pred = predict(prev, sys, u)
    k = prev.step + 1
    if y is None:
        return FilterState(pred.mean, pred.covariance, k), None
    res = update(pred, sys, y)
    post = FilterState(res.posterior.mean, res.posterior.covariance, k)
    return post, UpdateResult(post, res.gain, res.innovation, res.innovation_covariance)


@dataclass(frozen=True, eq=False)
class FilterRun:
    """Stacked output of :func:`run_filter` for ``T`` steps.

    Rows without a measurement have NaN innovation, innovation covariance
    and NIS.
    """

    means: np.ndarray  # (T, n)
    covariances: np.ndarray  # (T, n, n)
    innovations: np.ndarray  # (T, p)
    innovation_covariances: np.ndarray  # (T, p, p)
    nis: np.ndarray  # (T,)

    def __len__(self):
        return self.means.shape[0]

    def state(self, i: int, first_step: int = 1) -> FilterState:
        return FilterState(self.means[i], self.covariances[i], first_step + i)


def run_filter(
    sys: LinearDiscreteSystem,
    initial: FilterState,
    inputs: Sequence,
    measurements: Sequence,
    backend: Optional[str] = None,
) -> FilterRun:
    """Run the recursion over a whole sequence in one kernel call.

    ``measurements`` may contain ``None`` entries for predict-only steps.
    The kernel is the compiled one when it was built, else the numpy
    fallback; pass ``backend="python"`` or ``"compiled"`` to force one.
    """
    T = len(inputs)
    if len(measurements) != T:
        raise DimensionError("inputs and measurements differ in length")
    if initial.mean.size != sys.n:
        raise DimensionError(f"initial state has length {initial.mean.size}, expected {sys.n}")
    U = np.zeros((T, sys.m))
    Y = np.zeros((T, sys.p))
    has_y = np.zeros(T, dtype=np.uint8)
    for i, (u, y) in enumerate(zip(inputs, measurements)):
        u = as_vector(u, "u")
        if u.size != sys.m:
            raise DimensionError(f"input {i} has length {u.size}, expected {sys.m}")
        U[i] = u
        if y is not None:
            y = as_vector(y, "y")
            if y.size != sys.p:
                raise DimensionError(f"measurement {i} has length {y.size}, expected {sys.p}")
            Y[i] = y
            has_y[i] = 1
    kernel = _backend.get_filter_run(backend)
    try:
        out = kernel(
            np.ascontiguousarray(sys.A),
            np.ascontiguousarray(sys.B),
            np.ascontiguousarray(sys.C),
            np.ascontiguousarray(sys.R),
            np.ascontiguousarray(sys.Q),
            np.ascontiguousarray(initial.mean, dtype=float),
            np.ascontiguousarray(initial.covariance, dtype=float),
            U,
            Y,
            has_y,
        )
    except np.linalg.LinAlgError as exc:
        raise SingularInnovationError(str(exc)) from exc
    return FilterRun(*out)
