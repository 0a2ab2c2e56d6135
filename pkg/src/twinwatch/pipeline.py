"""Glue between telemetry, the filter and the detector.

The run configuration is one JSON document. Incubator parameters sit at the
top level under their own names; everything else is optional::

    {"c_h": 300, "c_b": 150, "g_hb": 1.0, "g_br": 0.5, "p_heat": 30,
     "t_room": 21, "dt": 3,
     "setpoint": 35, "band": 1,
     "R": [[1e-4, 0], [0, 1e-4]], "Q": [[2.5e-3]],
     "faults": [{"start": 600, "end": 660, "param": "g_br", "factor": 10}],
     "initial": {"mean": [21, 21], "cov": [[1, 0], [0, 1]]},
     "system": {"A": ..., "B": ..., "C": ..., "R": ..., "Q": ..., "dt": ...}}

``system`` replaces the incubator model for estimation only.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence, TextIO

import numpy as np

from .anomaly import AnomalyEvent, DetectorConfig, detect
from .errors import DimensionError, TelemetryError
from .incubator import (
    DEFAULT_BAND,
    DEFAULT_SETPOINT,
    FaultSchedule,
    IncubatorParams,
    build_system,
    simulate_run,
)
from .kalman import FilterState, run_filter
from .matgauss import Gaussian
from .statespace import LinearDiscreteSystem
from .telemetry import TelemetryRecord

ESTIMATE_COLUMNS = (
    "step",
    "timestamp",
    "mu_theater",
    "mu_tbox",
    "var_theater",
    "var_tbox",
    "innovation",
    "nis",
    "measured_tbox",
)

_KNOWN_KEYS = {
    "c_h", "c_b", "g_hb", "g_br", "p_heat", "t_room", "dt",
    "setpoint", "band", "R", "Q", "faults", "initial", "system",
}


@dataclass
class RunConfig:
    params: IncubatorParams = field(default_factory=IncubatorParams)
    faults: FaultSchedule = field(default_factory=FaultSchedule)
    setpoint: float = DEFAULT_SETPOINT
    band: float = DEFAULT_BAND
    R: Optional[list] = None
    Q: Optional[list] = None
    initial: Optional[dict] = None
    system: Optional[dict] = None

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        if not isinstance(d, dict):
            raise ValueError("config document must be a JSON object")
        unknown = set(d) - _KNOWN_KEYS
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(
            params=IncubatorParams.from_dict(d),
            faults=FaultSchedule.from_list(d.get("faults", [])),
            setpoint=float(d.get("setpoint", DEFAULT_SETPOINT)),
            band=float(d.get("band", DEFAULT_BAND)),
            R=d.get("R"),
            Q=d.get("Q"),
            initial=d.get("initial"),
            system=d.get("system"),
        )

    @classmethod
    def load(cls, path) -> "RunConfig":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))

    def to_dict(self) -> dict:
        d = self.params.to_dict()
        d.update(setpoint=self.setpoint, band=self.band, faults=self.faults.to_list())
        for key in ("R", "Q", "initial", "system"):
            if getattr(self, key) is not None:
                d[key] = getattr(self, key)
        return d

    def estimation_system(self) -> LinearDiscreteSystem:
        if self.system is not None:
            sys = LinearDiscreteSystem.from_dict(self.system)
        else:
            sys = build_system(self.params, self.R, self.Q)
        if sys.n != 2:
            raise DimensionError(f"state dimension mismatch: config system has n={sys.n}, telemetry needs n=2")
        if sys.m != 2:
            raise DimensionError(f"input dimension mismatch: config system has m={sys.m}, telemetry needs m=2")
        if sys.p != 1:
            raise DimensionError(f"measurement dimension mismatch: config system has p={sys.p}, telemetry needs p=1")
        return sys

    def prior(self) -> FilterState:
        if self.initial is None:
            t = self.params.t_room
            return FilterState(np.array([t, t]), np.eye(2), 0)
        g = Gaussian(self.initial["mean"], self.initial["cov"])
        if g.dim != 2:
            raise DimensionError(f"state dimension mismatch: initial belief has dimension {g.dim}, expected 2")
        return FilterState.from_gaussian(g)


@dataclass(frozen=True)
class EstimateRow:
    step: int
    timestamp: float
    mu_theater: float
    mu_tbox: float
    var_theater: float
    var_tbox: float
    innovation: Optional[float]
    nis: Optional[float]
    measured_tbox: Optional[float]


def step_indices(records: Sequence[TelemetryRecord], dt: float) -> list[int]:
    """Step number of each record counted from the first one (which is step 1)."""
    if not records:
        return []
    t0 = records[0].timestamp
    ks = []
    for i, r in enumerate(records):
        k = int(round((r.timestamp - t0) / dt)) + 1
        if ks and k <= ks[-1]:
            raise TelemetryError(f"record {i}: more than one sample in step {k}")
        ks.append(k)
    return ks


def estimate_records(
    records: Sequence[TelemetryRecord],
    sys: LinearDiscreteSystem,
    prior: FilterState,
    backend: Optional[str] = None,
) -> list[EstimateRow]:
    """Filter a recorded run; missing sample indices become predict-only rows.

    During a gap the last recorded input is held.
    """
    ks = step_indices(records, sys.dt)
    if not ks:
        return []
    by_step = dict(zip(ks, records))
    inputs, ys, stamps = [], [], []
    held = records[0]
    t0 = records[0].timestamp
    for k in range(1, ks[-1] + 1):
        r = by_step.get(k)
        if r is not None:
            held = r
        inputs.append([1.0 if held.heater_on else 0.0, held.t_room])
        ys.append(None if r is None else [r.t_box])
        stamps.append(r.timestamp if r is not None else t0 + (k - 1) * sys.dt)
    run = run_filter(sys, prior, inputs, ys, backend=backend)
    rows = []
    for i, k in enumerate(range(1, ks[-1] + 1)):
        measured = ys[i] is not None
        rows.append(
            EstimateRow(
                step=k,
                timestamp=stamps[i],
                mu_theater=float(run.means[i, 0]),
                mu_tbox=float(run.means[i, 1]),
                var_theater=float(run.covariances[i, 0, 0]),
                var_tbox=float(run.covariances[i, 1, 1]),
                innovation=float(run.innovations[i, 0]) if measured else None,
                nis=float(run.nis[i]) if measured else None,
                measured_tbox=float(ys[i][0]) if measured else None,
            )
        )
    return rows


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, int):
        return str(v)
    return repr(float(v))


def write_estimates(rows: Iterable[EstimateRow], fh: TextIO) -> None:
    fh.write(",".join(ESTIMATE_COLUMNS) + "\n")
    for r in rows:
        fh.write(",".join(_fmt(getattr(r, c)) for c in ESTIMATE_COLUMNS) + "\n")


def read_nis_stream(fh: TextIO) -> list[tuple[int, float]]:
    """``(step, nis)`` pairs from an estimate CSV, skipping predict-only rows."""
    reader = csv.reader(fh)
    try:
        header = [h.strip() for h in next(reader)]
    except StopIteration:
        raise TelemetryError("line 1: missing header") from None
    if "step" not in header or "nis" not in header:
        raise TelemetryError("line 1: estimate file needs 'step' and 'nis' columns")
    i_step, i_nis = header.index("step"), header.index("nis")
    out = []
    for lineno, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != len(header):
            raise TelemetryError(f"line {lineno}: expected {len(header)} fields, got {len(row)}")
        if not row[i_nis].strip():
            continue
        try:
            step = int(row[i_step])
            value = float(row[i_nis])
        except ValueError:
            raise TelemetryError(f"line {lineno}: bad step or nis value") from None
        if not math.isfinite(value) or value < 0:
            raise TelemetryError(f"line {lineno}: nis must be finite and non-negative")
        out.append((step, value))
    return out


def nis_stream(rows: Iterable[EstimateRow]) -> list[tuple[int, float]]:
    return [(r.step, r.nis) for r in rows if r.nis is not None]


def run_pipeline(
    cfg: RunConfig,
    steps: int,
    seed: int,
    detector: DetectorConfig = DetectorConfig(),
) -> tuple[list[TelemetryRecord], list[EstimateRow], list[AnomalyEvent]]:
    """Simulate, estimate and detect in process."""
    _, records = simulate_run(
        cfg.params, cfg.faults, steps, seed, setpoint=cfg.setpoint, band=cfg.band, R=cfg.R, Q=cfg.Q
    )
    sys = cfg.estimation_system()
    rows = estimate_records(records, sys, cfg.prior())
    events = detect(nis_stream(rows), sys.p, detector)
    return records, rows, events
