"""Linear discrete-time systems ``x_k = A x_{k-1} + B u_k (+ eps)``, ``y_k = C x_k (+ delta)``."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import cached_property
from typing import Literal, Optional, Sequence

import numpy as np
from scipy.linalg import expm

from .errors import DimensionError, NotPositiveDefiniteError
from .matgauss import as_matrix, as_vector, check_symmetric, is_psd, psd_sqrt, rng_for

PROCESS_STREAM = 0
MEASUREMENT_STREAM = 1


@dataclass(frozen=True, eq=False)
class LinearDiscreteSystem:
    """Time-invariant linear Gaussian system sampled every ``dt`` seconds.

    ``R`` is the process-noise covariance (n x n) and ``Q`` the
    measurement-noise covariance (p x p).
    """

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    R: np.ndarray
    Q: np.ndarray
    dt: float = 1.0

    def __post_init__(self):
        A = as_matrix(self.A, "A")
        B = as_matrix(self.B, "B")
        C = as_matrix(self.C, "C")
        n = A.shape[0]
        if A.shape != (n, n):
            raise DimensionError(f"A must be square, got {A.shape}")
        if B.shape[0] != n:
            raise DimensionError(f"B has {B.shape[0]} rows, expected {n}")
        if C.shape[1] != n:
            raise DimensionError(f"C has {C.shape[1]} columns, expected {n}")
        p = C.shape[0]
        R = as_matrix(self.R, "R")
        Q = as_matrix(self.Q, "Q")
        if R.shape != (n, n):
            raise DimensionError(f"R must be {n}x{n}, got {R.shape}")
        if Q.shape != (p, p):
            raise DimensionError(f"Q must be {p}x{p}, got {Q.shape}")
        R = check_symmetric(R, "R")
        Q = check_symmetric(Q, "Q")
        if not is_psd(R):
            raise NotPositiveDefiniteError("R is not positive semi-definite")
        if not is_psd(Q):
            raise NotPositiveDefiniteError("Q is not positive semi-definite")
        if not (float(self.dt) > 0):
            raise ValueError("dt must be positive")
        for name, arr in (("A", A), ("B", B), ("C", C), ("R", R), ("Q", Q)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "dt", float(self.dt))

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def m(self) -> int:
        return self.B.shape[1]

    @property
    def p(self) -> int:
        return self.C.shape[0]

    @cached_property
    def _noise_factors(self):
        return psd_sqrt(self.R), psd_sqrt(self.Q)

    def to_dict(self) -> dict:
        return {
            "A": self.A.tolist(),
            "B": self.B.tolist(),
            "C": self.C.tolist(),
            "R": self.R.tolist(),
            "Q": self.Q.tolist(),
            "dt": self.dt,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "LinearDiscreteSystem":
        missing = {"A", "B", "C", "R", "Q", "dt"} - set(d)
        if missing:
            raise ValueError(f"system document is missing keys: {sorted(missing)}")
        return cls(d["A"], d["B"], d["C"], d["R"], d["Q"], d["dt"])

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "LinearDiscreteSystem":
        return cls.from_dict(json.loads(text))


@dataclass(frozen=True, eq=False)
class ContinuousLTI:
    """``dx/dt = A_c x + B_c u``."""

    A_c: np.ndarray
    B_c: np.ndarray

    def __post_init__(self):
        A = as_matrix(self.A_c, "A_c")
        B = as_matrix(self.B_c, "B_c")
        if A.shape[0] != A.shape[1] or B.shape[0] != A.shape[0]:
            raise DimensionError(f"non-conformable A_c {A.shape} and B_c {B.shape}")
        object.__setattr__(self, "A_c", A)
        object.__setattr__(self, "B_c", B)


@dataclass(frozen=True)
class TrajectoryStep:
    k: int
    x: np.ndarray
    u: np.ndarray
    y: np.ndarray


@dataclass
class Trajectory:
    """Steps ``k = 1..len`` of a simulated run."""

    steps: list[TrajectoryStep] = field(default_factory=list)

    def __len__(self):
        return len(self.steps)

    def __iter__(self):
        return iter(self.steps)

    def __getitem__(self, i):
        return self.steps[i]

    @property
    def states(self) -> np.ndarray:
        return np.array([s.x for s in self.steps])

    @property
    def inputs(self) -> np.ndarray:
        return np.array([s.u for s in self.steps])

    @property
    def measurements(self) -> np.ndarray:
        return np.array([s.y for s in self.steps])


def _check_step_args(sys: LinearDiscreteSystem, x_prev, u):
    x_prev = as_vector(x_prev, "x_prev")
    u = as_vector(u, "u")
    if x_prev.size != sys.n:
        raise DimensionError(f"state has length {x_prev.size}, expected {sys.n}")
    if u.size != sys.m:
        raise DimensionError(f"input has length {u.size}, expected {sys.m}")
    return x_prev, u


def step(sys: LinearDiscreteSystem, x_prev, u) -> np.ndarray:
    """Noise-free transition ``A x_prev + B u``."""
    x_prev, u = _check_step_args(sys, x_prev, u)
    return sys.A @ x_prev + sys.B @ u


def measure(sys: LinearDiscreteSystem, x) -> np.ndarray:
    x = as_vector(x, "x")
    if x.size != sys.n:
        raise DimensionError(f"state has length {x.size}, expected {sys.n}")
    return sys.C @ x


def noise_draws(sys: LinearDiscreteSystem, seed: int, k: int) -> tuple[np.ndarray, np.ndarray]:
    """Process and measurement noise for step ``k``.

    Each comes from its own sub-stream ``(seed, k, 0)`` / ``(seed, k, 1)`` so
    the draws do not depend on evaluation order. The result equals
    ``mvn_sample(Gaussian(0, R), (seed, k, 0))`` and likewise for ``Q``.
    """
    LR, LQ = sys._noise_factors
    eps = LR @ rng_for((seed, k, PROCESS_STREAM)).standard_normal(sys.n)
    delta = LQ @ rng_for((seed, k, MEASUREMENT_STREAM)).standard_normal(sys.p)
    return eps, delta


def step_noisy(sys: LinearDiscreteSystem, x_prev, u, seed: int, k: int = 1):
    """One noisy transition and measurement; returns ``(x_next, y)``."""
    x_prev, u = _check_step_args(sys, x_prev, u)
    eps, delta = noise_draws(sys, seed, k)
    x_next = sys.A @ x_prev + sys.B @ u + eps
    return x_next, sys.C @ x_next + delta


def discretize(
    c: ContinuousLTI, dt: float, method: Literal["exact", "euler"] = "exact"
) -> tuple[np.ndarray, np.ndarray]:
    """Discretize under a zero-order hold on the input.

    ``exact`` exponentiates the augmented matrix ``[[A_c, B_c], [0, 0]] * dt``
    (scipy's scaling-and-squaring Pade ``expm``); the top blocks are
    ``exp(A_c dt)`` and ``int_0^dt exp(A_c s) ds B_c``. This needs no
    inverse of ``A_c``. ``euler`` is the first-order ``I + A_c dt``, ``B_c dt``.
    """
    if not (dt > 0):
        raise ValueError("dt must be positive")
    n, m = c.B_c.shape
    if method == "euler":
        return np.eye(n) + c.A_c * dt, c.B_c * dt
    if method != "exact":
        raise ValueError(f"unknown discretization method {method!r}")
    aug = np.zeros((n + m, n + m))
    aug[:n, :n] = c.A_c
    aug[:n, n:] = c.B_c
    E = expm(aug * dt)
    return E[:n, :n].copy(), E[:n, n:].copy()


def simulate(
    sys: LinearDiscreteSystem,
    x0,
    inputs: Sequence,
    seed: Optional[int] = None,
) -> Trajectory:
    """Iterate the system from ``x0``; noisy when ``seed`` is given."""
    x = as_vector(x0, "x0")
    if x.size != sys.n:
        raise DimensionError(f"x0 has length {x.size}, expected {sys.n}")
    traj = Trajectory()
    for k, u in enumerate(inputs, start=1):
        u = as_vector(u, "u")
        if seed is None:
            x = step(sys, x, u)
            y = measure(sys, x)
        else:
            x, y = step_noisy(sys, x, u, seed, k)
        traj.steps.append(TrajectoryStep(k, x, u, y))
    return traj
