"""Innovation-based anomaly detection.

Each measurement update yields a normalized innovation squared (NIS)
``nu^T S^-1 nu``, which is chi-square with ``p`` degrees of freedom while the
model is right. An event opens when M of the last N values exceed the
chi-square quantile and closes after ``recovery_n`` consecutive values at or
below it.
"""

from __future__ import annotations

import json
from collections import deque
from dataclasses import asdict, dataclass, field, fields
from typing import Iterable, Optional

import numpy as np
from scipy.linalg import solve_triangular

from .chi2 import chi2_ppf
from .errors import SingularInnovationError
from .kalman import UpdateResult


@dataclass(frozen=True)
class DetectorConfig:
    confidence: float = 0.99
    window_m: int = 3
    window_n: int = 5
    recovery_n: int = 5

    def __post_init__(self):
        if not 0.0 < self.confidence < 1.0:
            raise ValueError("confidence must lie in (0, 1)")
        if not 1 <= self.window_m <= self.window_n:
            raise ValueError("need 1 <= window_m <= window_n")
        if self.recovery_n < 1:
            raise ValueError("recovery_n must be at least 1")

    @classmethod
    def from_dict(cls, d: dict) -> "DetectorConfig":
        names = {f.name for f in fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise ValueError(f"unknown detector settings: {sorted(unknown)}")
        kw = {k: (float(v) if k == "confidence" else int(v)) for k, v in d.items()}
        return cls(**kw)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class AnomalyEvent:
    start_step: int
    end_step: Optional[int]
    peak_statistic: float
    threshold: float

    @property
    def is_open(self) -> bool:
        return self.end_step is None

    def overlaps(self, start: int, end: int) -> bool:
        stop = self.end_step if self.end_step is not None else float("inf")
        return self.start_step <= end and stop >= start

    def to_dict(self) -> dict:
        return {"start": self.start_step, "end": self.end_step, "peak": self.peak_statistic, "threshold": self.threshold}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, d: dict) -> "AnomalyEvent":
        return cls(int(d["start"]), None if d["end"] is None else int(d["end"]), float(d["peak"]), float(d["threshold"]))


def nis(u: UpdateResult) -> float:
    """Normalized innovation squared, via the Cholesky factor of ``S``."""
    S = np.asarray(u.innovation_covariance, dtype=float)
    try:
        L = np.linalg.cholesky(S)
    except np.linalg.LinAlgError as exc:
        raise SingularInnovationError("innovation covariance is not positive definite") from exc
    w = solve_triangular(L, np.asarray(u.innovation, dtype=float), lower=True)
    return float(w @ w)


def threshold(p: int, confidence: float) -> float:
    return chi2_ppf(confidence, p)


@dataclass
class DetectorState:
    """Resumable state of the M-of-N automaton for one stream."""

    threshold: float
    cfg: DetectorConfig
    window: deque = field(default_factory=deque)
    open_start: Optional[int] = None
    peak: float = 0.0
    quiet_run: int = 0

    def feed(self, step: int, value: float) -> Optional[AnomalyEvent]:
        """Consume one value; returns an event when one closes on this step."""
        exceed = value > self.threshold
        self.window.append(exceed)
        if len(self.window) > self.cfg.window_n:
            self.window.popleft()
        if self.open_start is None:
            if exceed and sum(self.window) >= self.cfg.window_m:
                self.open_start = step
                self.peak = value
                self.quiet_run = 0
            return None
        self.peak = max(self.peak, value)
        self.quiet_run = 0 if exceed else self.quiet_run + 1
        if self.quiet_run >= self.cfg.recovery_n:
            ev = AnomalyEvent(self.open_start, step, self.peak, self.threshold)
            self.open_start = None
            self.quiet_run = 0
            return ev
        return None

    def pending(self) -> Optional[AnomalyEvent]:
        if self.open_start is None:
            return None
        return AnomalyEvent(self.open_start, None, self.peak, self.threshold)


def detect(nis_stream: Iterable[tuple[int, float]], p: int, cfg: DetectorConfig = DetectorConfig()) -> list[AnomalyEvent]:
    """Fold the M-of-N automaton over ``(step, nis)`` pairs.

    An event that is still open at the end of the stream is returned with
    ``end_step=None``.
    """
    state = DetectorState(threshold(p, cfg.confidence), cfg)
    events = []
    for step, value in nis_stream:
        ev = state.feed(int(step), float(value))
        if ev is not None:
            events.append(ev)
    tail = state.pending()
    if tail is not None:
        events.append(tail)
    return events


def write_events(events: Iterable[AnomalyEvent], fh) -> None:
    for ev in events:
        fh.write(ev.to_json() + "\n")


def read_events(fh) -> list[AnomalyEvent]:
    return [AnomalyEvent.from_dict(json.loads(line)) for line in fh if line.strip()]
