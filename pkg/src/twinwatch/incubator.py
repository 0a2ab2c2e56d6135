"""Two-state incubator thermal plant: heater temperature and box-air temperature.

Continuous model, with state ``[T_h, T_b]`` and input ``[P, T_r]``::

    c_h dT_h/dt = P p_heat - g_hb (T_h - T_b)
    c_b dT_b/dt = g_hb (T_h - T_b) - g_br (T_b - T_r)

Only ``T_b`` is measured. The default parameter values are synthetic but
physically plausible; they are configuration, not calibration.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields, replace
from typing import Iterable, Optional, Sequence

import numpy as np

from .matgauss import as_vector
from .statespace import (
    ContinuousLTI,
    LinearDiscreteSystem,
    Trajectory,
    TrajectoryStep,
    discretize,
    noise_draws,
)
from .telemetry import TelemetryRecord

DEFAULT_R = ((1e-4, 0.0), (0.0, 1e-4))
DEFAULT_Q = ((2.5e-3,),)
DEFAULT_SETPOINT = 35.0
DEFAULT_BAND = 1.0

FAULTABLE_PARAMS = ("g_br",)


@dataclass(frozen=True)
class IncubatorParams:
    c_h: float = 300.0
    c_b: float = 150.0
    g_hb: float = 1.0
    g_br: float = 0.5
    p_heat: float = 30.0
    t_room: float = 21.0
    dt: float = 3.0

    def __post_init__(self):
        if not (self.c_h > 0 and self.c_b > 0):
            raise ValueError("heat capacities must be positive")
        if not (self.g_hb >= 0 and self.g_br >= 0):
            raise ValueError("conductances must be non-negative")
        if not self.p_heat >= 0:
            raise ValueError("p_heat must be non-negative")
        if not self.dt > 0:
            raise ValueError("dt must be positive")

    @classmethod
    def from_dict(cls, d: dict) -> "IncubatorParams":
        names = {f.name for f in fields(cls)}
        return cls(**{k: float(v) for k, v in d.items() if k in names})

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class Fault:
    """Multiply ``param`` by ``factor`` on steps ``start <= k < end``."""

    start: int
    end: int
    param: str = "g_br"
    factor: float = 10.0

    def __post_init__(self):
        if self.param not in FAULTABLE_PARAMS:
            raise ValueError(f"cannot fault parameter {self.param!r}")
        if not self.factor > 0:
            raise ValueError("fault factor must be positive")
        if self.end < self.start:
            raise ValueError("fault end precedes start")


@dataclass(frozen=True)
class FaultSchedule:
    faults: tuple[Fault, ...] = ()

    def __post_init__(self):
        ordered = tuple(sorted(self.faults, key=lambda f: f.start))
        for a, b in zip(ordered, ordered[1:]):
            if b.start < a.end:
                raise ValueError(f"faults [{a.start},{a.end}) and [{b.start},{b.end}) overlap")
        object.__setattr__(self, "faults", ordered)

    def active(self, k: int) -> Optional[Fault]:
        for f in self.faults:
            if f.start <= k < f.end:
                return f
        return None

    def to_list(self) -> list[dict]:
        return [asdict(f) for f in self.faults]

    @classmethod
    def from_list(cls, items: Iterable[dict]) -> "FaultSchedule":
        return cls(tuple(Fault(int(d["start"]), int(d["end"]), d.get("param", "g_br"), float(d["factor"])) for d in items))

    def to_json(self) -> str:
        return json.dumps(self.to_list())

    @classmethod
    def from_json(cls, text: str) -> "FaultSchedule":
        return cls.from_list(json.loads(text))


def continuous_model(p: IncubatorParams) -> ContinuousLTI:
    A_c = np.array(
        [
            [-p.g_hb / p.c_h, p.g_hb / p.c_h],
            [p.g_hb / p.c_b, -(p.g_hb + p.g_br) / p.c_b],
        ]
    )
    B_c = np.array([[p.p_heat / p.c_h, 0.0], [0.0, p.g_br / p.c_b]])
    return ContinuousLTI(A_c, B_c)


def build_system(p: IncubatorParams, R=None, Q=None) -> LinearDiscreteSystem:
    """Exact zero-order-hold discretization of the plant, measuring ``T_b``."""
    A, B = discretize(continuous_model(p), p.dt, "exact")
    return LinearDiscreteSystem(
        A=A,
        B=B,
        C=np.array([[0.0, 1.0]]),
        R=DEFAULT_R if R is None else R,
        Q=DEFAULT_Q if Q is None else Q,
        dt=p.dt,
    )


@dataclass
class Thermostat:
    """On/off controller with hysteresis on the box temperature."""

    setpoint: float = DEFAULT_SETPOINT
    band: float = DEFAULT_BAND
    heater_on: bool = False

    def __post_init__(self):
        if not self.band > 0:
            raise ValueError("band must be positive")

    def __call__(self, t_box: float) -> bool:
        if t_box < self.setpoint - self.band / 2:
            self.heater_on = True
        elif t_box > self.setpoint + self.band / 2:
            self.heater_on = False
        return self.heater_on


def thermostat_inputs(
    setpoint: float,
    band: float,
    t_room: float,
    n: int,
    plant: LinearDiscreteSystem,
    x0=None,
) -> list[np.ndarray]:
    """Inputs ``[P, t_room]`` from a noise-free closed-loop run of ``plant``.

    ``P_k`` is decided from the box temperature at step ``k-1``. ``x0``
    defaults to both temperatures at ``t_room``.
    """
    if n < 0:
        raise ValueError("n must be non-negative")
    ctl = Thermostat(setpoint, band)
    x = np.array([t_room, t_room], dtype=float) if x0 is None else as_vector(x0, "x0")
    inputs = []
    for _ in range(n):
        u = np.array([1.0 if ctl(x[1]) else 0.0, t_room])
        x = plant.A @ x + plant.B @ u
        inputs.append(u)
    return inputs


def simulate_run(
    p: IncubatorParams,
    faults: FaultSchedule,
    n: int,
    seed: int,
    *,
    setpoint: float = DEFAULT_SETPOINT,
    band: float = DEFAULT_BAND,
    R=None,
    Q=None,
    x0=None,
) -> tuple[Trajectory, list[TelemetryRecord]]:
    """Closed-loop noisy run of ``n`` steps with faults applied to the true plant.

    The thermostat acts on the true box temperature. Telemetry row ``k``
    carries the input applied during step ``k`` and the noisy measurement at
    its end, stamped ``k * dt``. Noise for step ``k`` comes from the same
    sub-streams whether or not a fault is active.
    """
    if n < 0:
        raise ValueError("n must be non-negative")
    nominal = build_system(p, R, Q)
    faulted: dict[Fault, LinearDiscreteSystem] = {}
    for f in faults.faults:
        scaled = replace(p, **{f.param: getattr(p, f.param) * f.factor})
        faulted[f] = build_system(scaled, nominal.R, nominal.Q)

    ctl = Thermostat(setpoint, band)
    x = np.array([p.t_room, p.t_room], dtype=float) if x0 is None else as_vector(x0, "x0")
    traj = Trajectory()
    records = []
    for k in range(1, n + 1):
        on = ctl(x[1])
        u = np.array([1.0 if on else 0.0, p.t_room])
        f = faults.active(k)
        plant = nominal if f is None else faulted[f]
        eps, delta = noise_draws(nominal, seed, k)
        x = plant.A @ x + plant.B @ u + eps
        y = plant.C @ x + delta
        traj.steps.append(TrajectoryStep(k, x, u, y))
        records.append(
            TelemetryRecord(
                timestamp=k * p.dt,
                heater_on=on,
                t_room=p.t_room,
                t_box=float(y[0]),
                t_heater=float(x[0]),
            )
        )
    return traj, records
