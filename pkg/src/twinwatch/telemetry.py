"""Telemetry records, CSV persistence and deterministic replay over an in-process transport."""

from __future__ import annotations

import csv
import os
import io
import json
import math
import queue
import time
from dataclasses import asdict, dataclass
from typing import Callable, Iterable, Optional, Protocol, TextIO, Union

from .errors import ReplayError, TelemetryError

REQUIRED_COLUMNS = ("timestamp", "heater_on", "t_room", "t_box")
OPTIONAL_COLUMN = "t_heater"
DEFAULT_TOPIC = "incubator/telemetry"


@dataclass(frozen=True)
class TelemetryRecord:
    timestamp: float
    heater_on: bool
    t_room: float
    t_box: float
    t_heater: Optional[float] = None

    def __post_init__(self):
        for name in ("timestamp", "t_room", "t_box"):
            if not math.isfinite(getattr(self, name)):
                raise TelemetryError(f"{name} must be finite")
        if self.t_heater is not None and not math.isfinite(self.t_heater):
            raise TelemetryError("t_heater must be finite")

    def to_json(self) -> str:
        return json.dumps(asdict(self))

    @classmethod
    def from_json(cls, text: str) -> "TelemetryRecord":
        return cls(**json.loads(text))


def _check_order(records: Iterable[TelemetryRecord]):
    last = -math.inf
    for i, r in enumerate(records):
        if r.timestamp < last:
            raise TelemetryError(f"record {i}: timestamp {r.timestamp} decreases")
        last = r.timestamp


def _parse_float(text: str, column: str, lineno: int) -> float:
    try:
        v = float(text)
    except ValueError:
        raise TelemetryError(f"line {lineno}: bad {column} value {text!r}") from None
    if not math.isfinite(v):
        raise TelemetryError(f"line {lineno}: {column} is not finite")
    return v


def read_csv(source: Union[str, "os.PathLike", TextIO]) -> list[TelemetryRecord]:
    """Parse ``timestamp,heater_on,t_room,t_box[,t_heater]`` rows in file order."""
    if hasattr(source, "read"):
        return _read(source)
    with open(source, newline="", encoding="utf-8") as fh:
        return _read(fh)


def _read(fh: TextIO) -> list[TelemetryRecord]:
    reader = csv.reader(fh)
    try:
        header = next(reader)
    except StopIteration:
        raise TelemetryError("line 1: missing header") from None
    header = [h.strip() for h in header]
    missing = [c for c in REQUIRED_COLUMNS if c not in header]
    if missing:
        raise TelemetryError(f"line 1: missing required column(s) {', '.join(missing)}")
    col = {name: header.index(name) for name in header}
    has_heater = OPTIONAL_COLUMN in col
    records = []
    last = -math.inf
    for lineno, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != len(header):
            raise TelemetryError(f"line {lineno}: expected {len(header)} fields, got {len(row)}")
        ts = _parse_float(row[col["timestamp"]], "timestamp", lineno)
        flag = row[col["heater_on"]].strip()
        if flag not in ("0", "1"):
            raise TelemetryError(f"line {lineno}: heater_on must be 0 or 1, got {flag!r}")
        t_heater = None
        if has_heater and row[col[OPTIONAL_COLUMN]].strip():
            t_heater = _parse_float(row[col[OPTIONAL_COLUMN]], OPTIONAL_COLUMN, lineno)
        if ts < last:
            raise TelemetryError(f"line {lineno}: timestamp {ts} is before {last}")
        last = ts
        records.append(
            TelemetryRecord(
                timestamp=ts,
                heater_on=flag == "1",
                t_room=_parse_float(row[col["t_room"]], "t_room", lineno),
                t_box=_parse_float(row[col["t_box"]], "t_box", lineno),
                t_heater=t_heater,
            )
        )
    return records


def write_csv(records: Iterable[TelemetryRecord], sink: Union[str, "os.PathLike", TextIO]) -> None:
    """Write records with a 5-column header if any record carries ``t_heater``.

    Floats are written with ``repr`` so they read back bit-exactly.
    """
    records = list(records)
    _check_order(records)
    if hasattr(sink, "write"):
        _write(records, sink)
    else:
        with open(sink, "w", newline="", encoding="utf-8") as fh:
            _write(records, fh)


def _write(records: list[TelemetryRecord], fh: TextIO) -> None:
    with_heater = any(r.t_heater is not None for r in records)
    cols = list(REQUIRED_COLUMNS) + ([OPTIONAL_COLUMN] if with_heater else [])
    fh.write(",".join(cols) + "\n")
    for r in records:
        row = [repr(float(r.timestamp)), "1" if r.heater_on else "0", repr(float(r.t_room)), repr(float(r.t_box))]
        if with_heater:
            row.append("" if r.t_heater is None else repr(float(r.t_heater)))
        fh.write(",".join(row) + "\n")


def to_csv_string(records: Iterable[TelemetryRecord]) -> str:
    buf = io.StringIO()
    write_csv(records, buf)
    return buf.getvalue()


@dataclass(frozen=True)
class TransportMessage:
    topic: str
    payload: str
    sequence: int

    def record(self) -> TelemetryRecord:
        return TelemetryRecord.from_json(self.payload)


class Transport(Protocol):
    """Publish side of a message channel. A broker-backed client would implement this."""

    def publish(self, message: TransportMessage) -> None: ...


class InProcessTransport:
    """FIFO queue with per-topic subscribers, delivered synchronously on publish.

    Sequence numbers must strictly increase per topic.
    """

    def __init__(self):
        self._subscribers: dict[str, list[Callable[[TransportMessage], None]]] = {}
        self._last_seq: dict[str, int] = {}
        self._pending: queue.SimpleQueue = queue.SimpleQueue()

    def subscribe(self, topic: str, consumer: Callable[[TransportMessage], None]) -> None:
        self._subscribers.setdefault(topic, []).append(consumer)

    def publish(self, message: TransportMessage) -> None:
        last = self._last_seq.get(message.topic, 0)
        if message.sequence <= last:
            raise ValueError(
                f"sequence {message.sequence} on {message.topic!r} does not follow {last}"
            )
        self._last_seq[message.topic] = message.sequence
        self._pending.put(message)
        while not self._pending.empty():
            msg = self._pending.get()
            for consumer in self._subscribers.get(msg.topic, ()):
                consumer(msg)

    def __call__(self, message: TransportMessage) -> None:
        self.publish(message)


Pacing = Union[str, float]


def replay(
    records: Iterable[TelemetryRecord],
    sink: Callable[[TransportMessage], None],
    pacing: Pacing = "instant",
    topic: str = DEFAULT_TOPIC,
    sleep: Callable[[float], None] = time.sleep,
) -> int:
    """Deliver records to ``sink`` as messages numbered 1..n; returns n.

    ``pacing`` is ``"instant"`` or a positive speed-up factor; with a factor
    the gap between consecutive timestamps is slept for ``delta / factor``
    seconds. A consumer exception is re-raised as :class:`ReplayError` with
    the count of messages delivered before it.
    """
    if pacing != "instant":
        factor = float(pacing)
        if not factor > 0:
            raise ValueError("pacing factor must be positive")
    delivered = 0
    prev_ts = None
    for r in records:
        if prev_ts is not None and r.timestamp < prev_ts:
            raise TelemetryError(f"record {delivered}: timestamps out of order")
        if pacing != "instant" and prev_ts is not None:
            sleep((r.timestamp - prev_ts) / factor)
        prev_ts = r.timestamp
        msg = TransportMessage(topic=topic, payload=r.to_json(), sequence=delivered + 1)
        try:
            sink(msg)
        except Exception as exc:
            raise ReplayError(f"consumer failed on message {msg.sequence}: {exc}", delivered) from exc
        delivered += 1
    return delivered
