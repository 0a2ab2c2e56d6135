"""Command-line entry point.

    twinwatch simulate --config inc.json --steps 2000 --fault gbr:x10:600-660 --seed 7 -o run.csv
    twinwatch estimate --telemetry run.csv --config inc.json -o est.csv
    twinwatch detect --estimates est.csv [--config det.json] [--confidence 0.99] -o events.jsonl

Exit codes: 0 success, 1 usage error, 2 data error. ``TWINWATCH_LOG`` sets
the log level (error, info or debug).
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import re
import sys
import tempfile
from dataclasses import replace
from pathlib import Path

from .anomaly import DetectorConfig, detect, write_events
from .errors import TwinwatchError
from .incubator import Fault, FaultSchedule, simulate_run
from .pipeline import RunConfig, estimate_records, read_nis_stream, write_estimates
from .telemetry import read_csv, write_csv

log = logging.getLogger("twinwatch")

EXIT_OK, EXIT_USAGE, EXIT_DATA = 0, 1, 2

_FAULT_RE = re.compile(r"^(?P<param>[a-z_]+):x(?P<factor>[0-9.eE+-]+):(?P<start>\d+)-(?P<end>\d+)$")
_PARAM_ALIASES = {"gbr": "g_br", "g_br": "g_br"}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def parse_fault(spec: str) -> Fault:
    """``param:xFACTOR:START-END``, e.g. ``gbr:x10:600-660``."""
    m = _FAULT_RE.match(spec.strip())
    if not m:
        raise argparse.ArgumentTypeError(f"bad fault spec {spec!r}, expected param:xFACTOR:START-END")
    param = _PARAM_ALIASES.get(m["param"])
    if param is None:
        raise argparse.ArgumentTypeError(f"unknown fault parameter {m['param']!r}")
    try:
        return Fault(int(m["start"]), int(m["end"]), param, float(m["factor"]))
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _atomic_write(path: Path, write) -> None:
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="", encoding="utf-8") as fh:
            write(fh)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def meta_path(output: Path) -> Path:
    output = Path(output)
    return output.with_name(output.stem + ".meta.json")


def cmd_simulate(args) -> int:
    cfg = RunConfig.load(args.config) if args.config else RunConfig()
    if args.steps < 0:
        raise UsageError("--steps must be non-negative")
    faults = FaultSchedule(cfg.faults.faults + tuple(args.fault or ()))
    cfg = replace(cfg, faults=faults)
    log.info("simulating %d steps, seed %d, %d fault(s)", args.steps, args.seed, len(faults.faults))
    _, records = simulate_run(
        cfg.params, faults, args.steps, args.seed, setpoint=cfg.setpoint, band=cfg.band, R=cfg.R, Q=cfg.Q
    )
    meta = {"config": cfg.to_dict(), "steps": args.steps, "seed": args.seed}
    out = Path(args.output)
    _atomic_write(out, lambda fh: write_csv(records, fh))
    _atomic_write(meta_path(out), lambda fh: fh.write(json.dumps(meta, indent=2, sort_keys=True) + "\n"))
    return EXIT_OK


def cmd_estimate(args) -> int:
    cfg = RunConfig.load(args.config) if args.config else RunConfig()
    sys_ = cfg.estimation_system()
    prior = cfg.prior()
    records = read_csv(args.telemetry)
    log.info("estimating over %d records", len(records))
    rows = estimate_records(records, sys_, prior)
    _atomic_write(Path(args.output), lambda fh: write_estimates(rows, fh))
    return EXIT_OK


def cmd_detect(args) -> int:
    det = DetectorConfig()
    if args.config:
        with open(args.config, encoding="utf-8") as fh:
            det = DetectorConfig.from_dict(json.load(fh))
    if args.confidence is not None:
        det = replace(det, confidence=args.confidence)
    with open(args.estimates, newline="", encoding="utf-8") as fh:
        stream = read_nis_stream(fh)
    events = detect(stream, args.dof, det)
    log.info("%d event(s)", len(events))
    _atomic_write(Path(args.output), lambda fh: write_events(events, fh))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="twinwatch", description="Incubator digital-twin monitoring with a Kalman filter.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("simulate", help="simulate the incubator and write telemetry CSV")
    p.add_argument("--config", help="run configuration JSON")
    p.add_argument("--steps", type=int, required=True)
    p.add_argument("--fault", type=parse_fault, action="append", help="param:xFACTOR:START-END (repeatable)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("estimate", help="run the Kalman filter over telemetry CSV")
    p.add_argument("--telemetry", required=True)
    p.add_argument("--config", help="run configuration JSON")
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("detect", help="detect anomalies from an estimate CSV")
    p.add_argument("--estimates", required=True)
    p.add_argument("--config", help="detector configuration JSON")
    p.add_argument("--confidence", type=float)
    p.add_argument("--dof", type=int, default=1, help="measurement dimension (default 1)")
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_detect)
    return parser


def _configure_logging():
    level = os.environ.get("TWINWATCH_LOG", "error").lower()
    levels = {"error": logging.ERROR, "info": logging.INFO, "debug": logging.DEBUG}
    logging.basicConfig(level=levels.get(level, logging.ERROR), format="%(levelname)s %(name)s: %(message)s")


def main(argv=None) -> int:
    _configure_logging()
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"twinwatch: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (TwinwatchError, ValueError, KeyError, TypeError, OSError, json.JSONDecodeError) as exc:
        print(f"twinwatch: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
